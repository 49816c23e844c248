"""
Key-recovery metrics. Class predictions are mapped to key-byte candidates through the leakage model, and the
confidences of M traces are combined as a sum of logs.
"""

import numpy as np

from app.aes.models import LeakageModel
from app.classifiers.models import Predictor
from app.dataset.models import Dataset
from app.evaluation.models import KeyHypothesisMap

CONFIDENCE_FLOOR = 1e-40


def log_confidences(predictions: np.ndarray, plaintexts: np.ndarray, model: LeakageModel) -> np.ndarray:
    """(N, 256) floored log-confidences of every trace under every key candidate."""
    confidences = KeyHypothesisMap.from_plaintexts(plaintexts, model).confidences(predictions)
    return np.log(np.maximum(confidences, CONFIDENCE_FLOOR))


def key_scores(predictions: np.ndarray, plaintexts: np.ndarray, model: LeakageModel, M: int) -> np.ndarray:
    """S_M[k] = sum over the first M traces of log d_i[k], with confidences floored at 1e-40."""
    predictions = np.asarray(predictions)
    if not 1 <= M <= len(predictions):
        raise ValueError(f"M must lie in [1, {len(predictions)}], got {M}")
    return log_confidences(predictions[:M], np.asarray(plaintexts)[:M], model).sum(axis=0)


def rank_of(scores: np.ndarray, true_key: int) -> int:
    """Number of candidates scoring strictly above the true key; 0 means recovered."""
    scores = np.asarray(scores)
    return int((scores > scores[true_key]).sum())


def rank_trajectory(
    predictions: np.ndarray, plaintexts: np.ndarray, model: LeakageModel, true_key: int, M_max: int
) -> np.ndarray:
    """Rank of the true key after each M = 1..M_max traces, in a single cumulative pass."""
    predictions, plaintexts = np.asarray(predictions)[:M_max], np.asarray(plaintexts)[:M_max]
    cumulative = np.cumsum(log_confidences(predictions, plaintexts, model), axis=0)
    return (cumulative > cumulative[:, true_key, None]).sum(axis=1)


def equivalence_rank(scores: np.ndarray, labels: np.ndarray, true_key: int) -> int:
    """Rank of the true key among groups of candidates whose hypothesis labels coincide on every trace.

    Candidates of a group score identically by construction, so each group counts once.
    """
    _, representatives = np.unique(np.asarray(labels).T, axis=0, return_index=True)
    scores = np.asarray(scores)
    return int((scores[representatives] > scores[true_key]).sum())


def accuracy_of(model: Predictor, dataset: Dataset) -> float:
    """Fraction of traces whose most likely class is the true label."""
    if not len(dataset):
        return float("nan")
    predicted = model.predict_proba(dataset.traces).argmax(axis=1)
    return float((predicted == dataset.labels).mean())


def equivalence_trajectory(
    predictions: np.ndarray, plaintexts: np.ndarray, model: LeakageModel, true_key: int, M_max: int
) -> np.ndarray:
    """`equivalence_rank` after each M = 1..M_max traces, the candidate groups being refined trace by trace."""
    predictions, plaintexts = np.asarray(predictions)[:M_max], np.asarray(plaintexts)[:M_max]
    labels = KeyHypothesisMap.from_plaintexts(plaintexts, model).labels.astype(np.int64)
    cumulative = np.cumsum(log_confidences(predictions, plaintexts, model), axis=0)
    groups = np.zeros(256, dtype=np.int64)
    ranks = np.empty(len(labels), dtype=np.int64)
    for m in range(len(labels)):
        _, groups = np.unique(groups * model.n_classes + labels[m], return_inverse=True)
        _, representatives = np.unique(groups, return_index=True)
        ranks[m] = (cumulative[m, representatives] > cumulative[m, true_key]).sum()
    return ranks
