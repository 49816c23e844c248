"""
Report files: CSV tables (`\\n` line endings) and SVG plots.
"""

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from app.adversarial.histograms import AmplitudeHistogram  # noqa: E402
from app.countermeasure.models import InsertionPoint  # noqa: E402
from app.evaluation.models import OverheadRow, RankCurve  # noqa: E402

OVERHEAD_COLUMNS = ["variant", "runs", "min_cycles", "avg_cycles", "max_cycles"]

# Reproducible SVG output: fixed element ids, no creation date
plt.rcParams["svg.hashsalt"] = "side-channel-lab"
SVG_METADATA = {"Date": None, "Creator": None}


def _write_frame(path: str | Path, frame: pd.DataFrame, **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", **kwargs)
    return path


def rank_curve_frame(curve: RankCurve) -> pd.DataFrame:
    frame = pd.DataFrame({"M": curve.ms, "mean_rank": curve.mean})
    for r, ranks in enumerate(curve.per_repetition):
        frame[f"rep_{r}"] = ranks
    return frame


def write_rank_curve(path: str | Path, curve: RankCurve) -> Path:
    """CSV with columns M, mean_rank, rep_0..rep_{R-1}."""
    return _write_frame(path, rank_curve_frame(curve), float_format="%.4f")


def write_overhead(path: str | Path, rows: Sequence[OverheadRow]) -> Path:
    """CSV with columns variant, runs, min_cycles, avg_cycles (two decimals), max_cycles."""
    frame = pd.DataFrame([vars(row) for row in rows], columns=OVERHEAD_COLUMNS)
    frame["avg_cycles"] = frame["avg_cycles"].map(lambda x: f"{x:.2f}")
    return _write_frame(path, frame)


def write_probe_log(path: str | Path, points: Sequence[InsertionPoint]) -> Path:
    """CSV with columns target_sample, iteration, index, sentinel_sample."""
    frame = pd.DataFrame(
        [vars(probe) for point in points for probe in point.probes],
        columns=["target_sample", "iteration", "index", "sentinel_sample"],
    )
    return _write_frame(path, frame)


def write_position_histogram(path: str | Path, counts: np.ndarray) -> Path:
    return _write_frame(path, pd.DataFrame({"position": np.arange(len(counts)), "count": counts}))


def write_amplitude_histogram(path: str | Path, histogram: AmplitudeHistogram) -> Path:
    frame = pd.DataFrame(
        {"low": histogram.edges[:-1], "high": histogram.edges[1:], "count": histogram.counts},
    )
    return _write_frame(path, frame, float_format="%.6g")


def write_table(path: str | Path, records: Sequence[Mapping]) -> Path:
    """Generic CSV of homogeneous records (accuracy and summary tables)."""
    return _write_frame(path, pd.DataFrame(list(records)), float_format="%.6g")


def _save(fig: plt.Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return path


def plot_rank_curves(path: str | Path, curves: Mapping[str, RankCurve], title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, curve in curves.items():
        ax.plot(curve.ms, curve.mean, label=label)
    ax.set_xlabel("Number of attack traces M")
    ax.set_ylabel("Mean rank of k*")
    ax.set_ylim(bottom=0)
    if title:
        ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def plot_position_histogram(path: str | Path, counts: np.ndarray, correlation: np.ndarray | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.bar(np.arange(len(counts)), counts, width=1.0, color="tab:blue")
    ax.set_xlabel("Sample")
    ax.set_ylabel("Perturbations")
    if correlation is not None:
        twin = ax.twinx()
        twin.plot(np.abs(correlation), color="tab:red", linewidth=0.8)
        twin.set_ylabel("|correlation|")
    return _save(fig, path)


def plot_amplitude_histogram(path: str | Path, histograms: Mapping[str, AmplitudeHistogram]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3))
    for label, histogram in histograms.items():
        ax.stairs(histogram.counts, histogram.edges, label=label)
    ax.set_xlabel("Amplitude (standardized)")
    ax.set_ylabel("Perturbations")
    ax.legend()
    return _save(fig, path)
