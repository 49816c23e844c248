"""
Template attack: class-conditional multivariate Gaussians fitted on profiling traces (sample mean, unbiased sample
covariance), shrunk towards their diagonal, and used as a quadratic discriminant.
"""

import logging
from typing import Literal

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from app.dataset.models import Dataset
from app.errors import TemplateError
from app.template.models import TemplateModel

logger = logging.getLogger(__name__)

RIDGE = 1e-6


def class_statistics(traces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased (N - 1) sample covariance of one class."""
    traces = np.asarray(traces, dtype=np.float64)
    mean = traces.mean(axis=0)
    centered = traces - mean
    return mean, centered.T @ centered / (len(traces) - 1)


def regularize(covariance: np.ndarray, regularization: float, ridge: float = RIDGE) -> np.ndarray:
    """(1 - λ)Σ + λ diag(Σ) + ε I"""
    diagonal = np.diag(np.diag(covariance))
    return (1 - regularization) * covariance + regularization * diagonal + ridge * np.eye(len(covariance))


def fit_factors(covariances: np.ndarray, regularization: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Lower Cholesky factors and log-determinants of a stack of regularized covariances.

    Raises:
        TemplateError: A covariance is not positive definite.
    """
    factors, log_dets = [], []
    for c, covariance in enumerate(covariances):
        try:
            factor = cholesky(covariance, lower=True)
        except LinAlgError:
            hint = f" (currently {regularization})" if regularization is not None else ""
            raise TemplateError(
                f"covariance of class {c} is not positive definite: raise the regularization{hint}"
            ) from None
        factors.append(factor)
        log_dets.append(2 * np.log(np.diag(factor)).sum())
    return np.stack(factors), np.array(log_dets)


def fit_templates(
    dataset: Dataset,
    regularization: float = 0.1,
    ridge: float = RIDGE,
    priors: Literal["empirical", "uniform"] | np.ndarray = "empirical",
) -> TemplateModel:
    """Fit one Gaussian template per class.

    Args:
        dataset (Dataset): Profiling dataset (standardized or not).
        regularization (float, optional): Shrinkage λ towards the diagonal. Defaults to 0.1.
        ridge (float, optional): ε added to the diagonal. Defaults to 1e-6.
        priors (Literal["empirical", "uniform"] | np.ndarray, optional): Class priors. Defaults to "empirical".

    Raises:
        TemplateError: A class has fewer than 2 traces, or a covariance is not positive definite after regularization.

    Returns:
        TemplateModel: The fitted templates.
    """
    if not 0 <= regularization <= 1:
        raise ValueError(f"regularization must lie in [0, 1], got {regularization}")
    m = dataset.n_classes
    counts = np.bincount(dataset.labels, minlength=m)[:m]
    means, covariances = [], []
    for c in range(m):
        if counts[c] < 2:
            raise TemplateError(f"class {c} has {counts[c]} profiling traces, at least 2 are required")
        mean, covariance = class_statistics(dataset.traces[dataset.labels == c])
        means.append(mean)
        covariances.append(regularize(covariance, regularization, ridge))
    factors, log_dets = fit_factors(np.stack(covariances), regularization)

    if isinstance(priors, str):
        priors = counts / counts.sum() if priors == "empirical" else np.full(m, 1 / m)
    priors = np.asarray(priors, dtype=np.float64)
    if priors.shape != (m,) or not np.isclose(priors.sum(), 1.0):
        raise ValueError("priors must be a probability vector over the classes")

    logger.info(f"Fitted {m} templates on {len(dataset)} traces of {dataset.n} samples")
    return TemplateModel(
        means=np.stack(means),
        covariances=np.stack(covariances),
        cholesky=factors,
        log_dets=log_dets,
        priors=priors,
        regularization=regularization,
        ridge=ridge,
        stats=dataset.stats,
    )


def log_likelihood(model: TemplateModel, trace: np.ndarray, c: int) -> float:
    """Log-density of one trace under the template of class c."""
    return float(model.log_likelihoods(np.asarray(trace)[None, :])[0, c])


def ta_classify(model: TemplateModel, trace: np.ndarray) -> np.ndarray:
    """Posterior prediction vector of one trace."""
    return model.predict_proba(np.asarray(trace)[None, :])[0]
