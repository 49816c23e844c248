"""
Standardization, splits and correlation analysis of trace datasets.
"""

import logging

import numpy as np

from app.aes.leakage import sensitive_hamming_weight
from app.dataset.models import Dataset, StandardizationStats
from app.errors import DatasetError

logger = logging.getLogger(__name__)


def standardize(dataset: Dataset) -> tuple[Dataset, StandardizationStats]:
    """Z-score every sample column.

    Raises:
        DatasetError: Fewer than 2 traces.

    Returns:
        tuple[Dataset, StandardizationStats]: Standardized float64 dataset and the statistics to reuse on attack sets.
    """
    if len(dataset) < 2:
        raise DatasetError(f"standardization needs at least 2 traces, got {len(dataset)}")
    traces = np.asarray(dataset.traces, dtype=np.float64)
    stats = StandardizationStats(mean=traces.mean(axis=0), sd=traces.std(axis=0))
    return apply_stats(dataset, stats), stats


def apply_stats(dataset: Dataset, stats: StandardizationStats) -> Dataset:
    """Standardize a dataset with statistics computed elsewhere (e.g. on the profiling set)."""
    if stats.n != dataset.n:
        raise DatasetError(f"statistics cover {stats.n} samples but traces have {dataset.n}")
    standardized = dataset.with_traces(stats.apply(dataset.traces))
    standardized.stats = stats
    return standardized


def split(dataset: Dataset, profiling_count: int, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded, disjoint and exhaustive partition into a profiling and an attack part.

    Raises:
        DatasetError: `profiling_count` is not in [1, N - 1].
    """
    if not 0 < profiling_count < len(dataset):
        raise DatasetError(f"profiling_count must lie in [1, {len(dataset) - 1}], got {profiling_count}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    return dataset.subset(order[:profiling_count]), dataset.subset(order[profiling_count:])


def subsample(dataset: Dataset, count: int, seed: int) -> Dataset:
    """Seeded random subset of at most `count` traces."""
    if count >= len(dataset):
        return dataset
    return dataset.subset(np.sort(np.random.default_rng(seed).choice(len(dataset), count, replace=False)))


def correlation_profile(dataset: Dataset) -> np.ndarray:
    """Per-sample Pearson correlation between the traces and HW(Sbox(p[b] ^ k*[b])).

    Zero-variance columns get a correlation of 0.

    Raises:
        DatasetError: The dataset does not share a single key, or holds fewer than 3 traces.
    """
    if len(dataset) < 3:
        raise DatasetError(f"correlation needs at least 3 traces, got {len(dataset)}")
    if dataset.fixed_key is None:
        raise DatasetError("correlation analysis needs a fixed-key dataset")

    target = sensitive_hamming_weight(dataset.plaintexts, dataset.keys, dataset.leakage_model).astype(np.float64)
    traces = np.asarray(dataset.traces, dtype=np.float64)
    xc = traces - traces.mean(axis=0)
    yc = target - target.mean()
    numerator = yc @ xc
    denominator = np.sqrt((xc**2).sum(axis=0)) * np.sqrt((yc**2).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denominator > 0, numerator / denominator, 0.0)
