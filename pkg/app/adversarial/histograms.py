"""
Where and how strongly the mined perturbations hit: position and amplitude histograms, and their peaks.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import find_peaks

from app.adversarial.models import PerturbationSet
from app.adversarial.one_pixel import AMPLITUDE_BOUNDS

AMPLITUDE_BINS = 160


@dataclass
class AmplitudeHistogram:
    counts: np.ndarray
    edges: np.ndarray  # len(counts) + 1

    @property
    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2

    @property
    def range(self) -> tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    def same_binning(self, other: "AmplitudeHistogram") -> bool:
        return self.edges.shape == other.edges.shape and np.allclose(self.edges, other.edges)


def _positions(perturbations: PerturbationSet | np.ndarray) -> np.ndarray:
    if isinstance(perturbations, PerturbationSet):
        return perturbations.positions
    return np.asarray(perturbations, dtype=np.int64)


def position_histogram(perturbations: PerturbationSet | np.ndarray, n: int) -> np.ndarray:
    """Count of perturbations per sample index, as an n-vector."""
    positions = _positions(perturbations)
    if len(positions) and (positions.min() < 0 or positions.max() >= n):
        raise ValueError(f"perturbation positions must lie in [0, {n})")
    return np.bincount(positions, minlength=n)


def amplitude_histogram(
    perturbations: PerturbationSet | np.ndarray,
    bins: int = AMPLITUDE_BINS,
    range: Optional[tuple[float, float]] = None,
) -> AmplitudeHistogram:
    """Histogram of perturbation amplitudes.

    The range defaults to the empirical one (AMPLITUDE_BOUNDS for an empty set). Values outside the range are clamped
    to the edge bins and counted.
    """
    amplitudes = perturbations.amplitudes if isinstance(perturbations, PerturbationSet) else np.asarray(perturbations)
    if range is None:
        range = (float(amplitudes.min()), float(amplitudes.max())) if len(amplitudes) else AMPLITUDE_BOUNDS
    low, high = range
    counts, edges = np.histogram(np.clip(amplitudes, low, high), bins=bins, range=(low, high))
    return AmplitudeHistogram(counts=counts, edges=edges)


def top_peaks(values: np.ndarray, k: int, distance: int = 1) -> np.ndarray:
    """Indices of the k highest local maxima of `values`, highest first. Maxima at both ends count."""
    values = np.asarray(values, dtype=np.float64)
    if not len(values) or k <= 0:
        return np.empty(0, dtype=np.int64)
    floor = values.min() - 1.0
    padded = np.concatenate([[floor], values, [floor]])
    peaks, properties = find_peaks(padded, height=floor + 1.0, distance=max(1, distance))
    order = np.argsort(-properties["peak_heights"], kind="stable")
    return (peaks[order][:k] - 1).astype(np.int64)


def peak_agreement(positions: PerturbationSet | np.ndarray, peaks: np.ndarray, radius: int) -> float:
    """Fraction of positions within ±radius samples of at least one peak."""
    positions = _positions(positions)
    peaks = np.asarray(peaks, dtype=np.int64)
    if not len(positions) or not len(peaks):
        return 0.0
    distance = np.abs(positions[:, None] - peaks[None, :]).min(axis=1)
    return float((distance <= radius).mean())
