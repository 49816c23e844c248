from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import softmax

from app.dataset.models import StandardizationStats

LOG_2PI = np.log(2 * np.pi)


@dataclass
class TemplateModel:
    """Per-class multivariate Gaussians.

    `covariances` are the regularized matrices; `cholesky` holds their lower factors and `log_dets` their
    log-determinants.
    """

    means: np.ndarray  # (m, n)
    covariances: np.ndarray  # (m, n, n)
    cholesky: np.ndarray  # (m, n, n)
    log_dets: np.ndarray  # (m,)
    priors: np.ndarray  # (m,)
    regularization: float
    ridge: float
    stats: Optional[StandardizationStats] = None

    kind = "template"

    @property
    def n_classes(self) -> int:
        return len(self.means)

    @property
    def input_length(self) -> int:
        return self.means.shape[1]

    def log_likelihoods(self, traces: np.ndarray) -> np.ndarray:
        """(B, m) Gaussian log-densities of a batch of traces under every class."""
        traces = np.atleast_2d(np.asarray(traces, dtype=np.float64))
        n = self.input_length
        out = np.empty((len(traces), self.n_classes))
        for c in range(self.n_classes):
            whitened = solve_triangular(self.cholesky[c], (traces - self.means[c]).T, lower=True)
            out[:, c] = -0.5 * (n * LOG_2PI + self.log_dets[c] + (whitened**2).sum(axis=0))
        return out

    def predict_proba(self, traces: np.ndarray) -> np.ndarray:
        """Class posteriors (priors applied), normalized in the log domain."""
        with np.errstate(divide="ignore"):
            log_priors = np.log(self.priors)
        return softmax(self.log_likelihoods(traces) + log_priors, axis=1)
