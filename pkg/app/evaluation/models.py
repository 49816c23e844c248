from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.aes.leakage import hypothesis_labels
from app.aes.models import LeakageModel


@dataclass
class KeyHypothesisMap:
    """Class index of every attack trace under every candidate value of the attacked key byte."""

    labels: np.ndarray  # (N, 256)

    @classmethod
    def from_plaintexts(cls, plaintexts: np.ndarray, model: LeakageModel) -> "KeyHypothesisMap":
        return cls(labels=hypothesis_labels(plaintexts, model))

    def confidences(self, predictions: np.ndarray) -> np.ndarray:
        """(N, 256) confidence d_i[k] = prediction_i[label of trace i under candidate k]."""
        predictions = np.asarray(predictions)
        return predictions[np.arange(len(self.labels))[:, None], self.labels]


@dataclass
class RankCurve:
    """Rank of the true key byte after M = 1..M_max attack traces, per repetition."""

    per_repetition: np.ndarray  # (R, M_max)
    accuracies: list[float] = field(default_factory=list)
    equivalence: Optional[np.ndarray] = None  # (R, M_max), rank among distinguishable candidate groups

    @property
    def ms(self) -> np.ndarray:
        return np.arange(1, self.per_repetition.shape[1] + 1)

    @property
    def mean(self) -> np.ndarray:
        return self.per_repetition.mean(axis=0)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    def traces_to_rank_zero(self) -> Optional[int]:
        """Smallest M from which the mean rank stays 0 up to M_max, None if it never settles at 0."""
        nonzero = np.flatnonzero(self.mean > 0)
        if not len(nonzero):
            return 1
        m = int(nonzero[-1]) + 2
        return m if m <= len(self.mean) else None

    def mean_rank_at(self, m: int) -> float:
        return float(self.mean[min(m, len(self.mean)) - 1])


@dataclass
class NaiveStudyReport:
    """Attacker retrained on one-pixel conversions of every trace, side by side with the original attacker."""

    source: RankCurve
    adversarial: RankCurve
    conversion_success_rate: float

    @property
    def summary(self) -> dict[str, Optional[int] | float]:
        return {
            "source_rank_zero": self.source.traces_to_rank_zero(),
            "adversarial_rank_zero": self.adversarial.traces_to_rank_zero(),
            "conversion_success_rate": self.conversion_success_rate,
        }


@dataclass
class OverheadRow:
    variant: str
    runs: int
    min_cycles: int
    avg_cycles: float
    max_cycles: int
