from dataclasses import dataclass, field
from typing import Annotated, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

PERTURBATION_COLUMNS = [
    "trace_id",
    "position",
    "amplitude",
    "success",
    "confidence_target_class",
    "achieved_confidence",
]


class DeConfig(BaseModel):
    """Differential evolution parameters (DE/rand/1/bin)."""

    population_size: int = Field(400, ge=4)
    max_iterations: int = Field(100, ge=0)
    differential_weight: float = Field(0.5, gt=0, le=2, description="F")
    crossover_rate: float = Field(0.9, ge=0, le=1, description="CR")
    bounds: list[tuple[float, float]] = Field(default_factory=list, description="(low, high) per dimension")
    seed: int = 0

    @model_validator(mode="after")
    def check_bounds(self) -> "DeConfig":
        for low, high in self.bounds:
            if not (np.isfinite(low) and np.isfinite(high)) or low > high:
                raise ValueError(f"invalid bounds ({low}, {high})")
        return self

    def with_bounds(self, bounds: list[tuple[float, float]], seed: Optional[int] = None) -> "DeConfig":
        update: dict = {"bounds": bounds}
        if seed is not None:
            update["seed"] = seed
        return self.model_copy(update=update)


class ConfidenceTarget(BaseModel):
    """Succeeds once the confidence of `target_class` reaches `tau`.

    Without a target class, each trace targets its runner-up class under the unperturbed prediction.
    """

    kind: Literal["confidence"] = "confidence"
    target_class: Optional[int] = Field(None, ge=0)
    tau: float = Field(0.95, gt=0, lt=1)


class Balance(BaseModel):
    """Succeeds once the two class confidences differ by at most `sigma`. Two-class models only."""

    kind: Literal["balance"] = "balance"
    sigma: float = Field(0.05, ge=0)


Termination = Annotated[ConfidenceTarget | Balance, Field(discriminator="kind")]


@dataclass
class Perturbation:
    """Best one-sample perturbation found for a trace.

    `amplitude` replaces the standardized sample at `position`. `achieved_confidence` is the confidence of
    `target_class` (of class 0 under Balance); `confidences` is the full prediction vector when known.
    """

    trace_id: int
    position: int
    amplitude: float
    success: bool
    target_class: Optional[int]
    achieved_confidence: float
    confidences: Optional[np.ndarray] = field(default=None, repr=False)
    iterations: int = 0


@dataclass
class PerturbationSet:
    perturbations: list[Perturbation] = field(default_factory=list)
    termination: Optional[ConfidenceTarget | Balance] = None

    def __len__(self) -> int:
        return len(self.perturbations)

    def __iter__(self):
        return iter(self.perturbations)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.perturbations], dtype=np.int64)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.perturbations], dtype=np.float64)

    @property
    def successful(self) -> "PerturbationSet":
        return PerturbationSet([p for p in self.perturbations if p.success], self.termination)

    @property
    def success_rate(self) -> float:
        return float(np.mean([p.success for p in self.perturbations])) if self.perturbations else 0.0

    @property
    def mean_iterations(self) -> float:
        return float(np.mean([p.iterations for p in self.perturbations])) if self.perturbations else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "trace_id": p.trace_id,
                    "position": p.position,
                    "amplitude": p.amplitude,
                    "success": int(p.success),
                    "confidence_target_class": "" if p.target_class is None else p.target_class,
                    "achieved_confidence": p.achieved_confidence,
                }
                for p in self.perturbations
            ],
            columns=PERTURBATION_COLUMNS,
        )
