from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from app.aes.leakage import labels_of
from app.aes.models import AcquisitionRecord, LeakageModel
from app.typings import KeyPolicy, PlaintextPolicy
from app.vm.models import DeviceConfig

EPSILON = 1e-6


@dataclass
class StandardizationStats:
    """Per-sample mean and standard deviation, the latter floored at `EPSILON`."""

    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.sd = np.maximum(np.asarray(self.sd, dtype=np.float64), EPSILON)

    @property
    def n(self) -> int:
        return len(self.mean)

    def apply(self, traces: np.ndarray) -> np.ndarray:
        return (np.asarray(traces, dtype=np.float64) - self.mean) / self.sd

    def standardize_at(self, values: np.ndarray, positions: np.ndarray) -> np.ndarray:
        """Standardize raw values observed at the given sample positions."""
        return (np.asarray(values, dtype=np.float64) - self.mean[positions]) / self.sd[positions]

    def raw_at(self, z: np.ndarray, positions: np.ndarray) -> np.ndarray:
        """Inverse of `standardize_at`."""
        return np.asarray(z) * self.sd[positions] + self.mean[positions]


@dataclass
class Dataset:
    """Labeled traces of a campaign.

    Records are held column-wise (`plaintexts`, `keys`, `labels`); `records` rebuilds the per-trace view. `stats` is
    set once the traces are standardized; `lengths` keeps the capture lengths before padding when known.
    """

    traces: np.ndarray
    plaintexts: np.ndarray
    keys: np.ndarray
    labels: np.ndarray
    leakage_model: LeakageModel
    key_policy: KeyPolicy = "random"
    stats: Optional[StandardizationStats] = None
    lengths: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.traces.ndim != 2:
            raise ValueError("traces must be an N x n matrix")
        if not len(self.traces) == len(self.plaintexts) == len(self.keys) == len(self.labels):
            raise ValueError("record count must equal trace count")

    def __len__(self) -> int:
        return len(self.traces)

    @property
    def n(self) -> int:
        """Fixed trace length."""
        return self.traces.shape[1]

    @property
    def n_classes(self) -> int:
        return self.leakage_model.n_classes

    @property
    def standardized(self) -> bool:
        return self.stats is not None

    @property
    def records(self) -> list[AcquisitionRecord]:
        return [
            AcquisitionRecord(plaintext=bytes(p), key=bytes(k), label=int(y))
            for p, k, y in zip(self.plaintexts, self.keys, self.labels)
        ]

    @property
    def fixed_key(self) -> Optional[bytes]:
        """The key shared by every trace, if any."""
        if len(self) == 0 or not (self.keys == self.keys[0]).all():
            return None
        return bytes(self.keys[0])

    def subset(self, indices: np.ndarray) -> "Dataset":
        return replace(
            self,
            traces=self.traces[indices],
            plaintexts=self.plaintexts[indices],
            keys=self.keys[indices],
            labels=self.labels[indices],
            lengths=self.lengths[indices] if self.lengths is not None else None,
        )

    def relabel(self, leakage_model: LeakageModel) -> "Dataset":
        """Same traces labeled under another leakage model."""
        return replace(self, leakage_model=leakage_model, labels=labels_of(self.plaintexts, self.keys, leakage_model))

    def with_traces(self, traces: np.ndarray) -> "Dataset":
        return replace(self, traces=traces)


class Campaign(BaseModel):
    """Acquisition campaign. Run i draws its inputs and noise from seeds derived from (`seed`, i)."""

    count: int = Field(ge=1)
    key_policy: KeyPolicy = "random"
    fixed_key: Optional[str] = Field(None, description="Hex-encoded key of fixed-key campaigns")
    plaintext_policy: PlaintextPolicy = "random"
    config: DeviceConfig = Field(default_factory=DeviceConfig)
    recompile_each_run: bool = False
    length_cap: int = Field(840, ge=1, description="Fixed trace length n in samples")
    seed: int = 0

    @field_validator("fixed_key")
    @classmethod
    def check_fixed_key(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and len(bytes.fromhex(v)) != 16:
            raise ValueError("fixed_key must hold 16 bytes")
        return v

    def key_bytes(self) -> Optional[bytes]:
        if self.key_policy == "random":
            return None
        if self.fixed_key is None:
            raise ValueError("fixed-key campaigns need a fixed_key")
        return bytes.fromhex(self.fixed_key)
