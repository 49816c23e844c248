from dataclasses import dataclass, field
from typing import Literal, Optional, Protocol, runtime_checkable

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import softmax

from app.classifiers.network import Network
from app.dataset.models import StandardizationStats

Activation = Literal["relu", "tanh", "sigmoid"]
Precision = Literal["float32", "float64"]


@runtime_checkable
class Predictor(Protocol):
    """Anything producing prediction vectors for a batch of standardized traces."""

    @property
    def n_classes(self) -> int: ...

    def predict_proba(self, traces: np.ndarray) -> np.ndarray: ...


class TrainingSpec(BaseModel):
    learning_rate: float = Field(1e-3, gt=0)
    batch_size: int = Field(256, ge=1)
    epochs: int = Field(20, ge=0)
    seed: int = 0
    n_classes: int = Field(2, ge=2, description="Class count m, i.e. the output width")
    precision: Precision = "float32"


class MlpSpec(TrainingSpec):
    kind: Literal["mlp"] = "mlp"
    hidden_widths: list[int] = Field(default_factory=lambda: [200] * 5)
    activation: Activation = "relu"

    @model_validator(mode="after")
    def check_widths(self) -> "MlpSpec":
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("layer widths must be positive")
        return self


class ConvBlock(BaseModel):
    filters: int = Field(ge=1)
    kernel_length: int = Field(ge=1)
    pool_length: int = Field(ge=1)


class CnnSpec(TrainingSpec):
    kind: Literal["cnn"] = "cnn"
    conv_blocks: list[ConvBlock] = Field(
        default_factory=lambda: [ConvBlock(filters=f, kernel_length=11, pool_length=2) for f in (8, 16, 32, 64)]
    )
    dense_widths: list[int] = Field(default_factory=lambda: [512])
    activation: Activation = "relu"
    epochs: int = Field(10, ge=0)
    input_length: Optional[int] = Field(None, ge=1, description="Trace length, checked against kernels and pools")

    @classmethod
    def uniform(cls, filters: list[int], kernel_length: int, pool_length: int, **kwargs) -> "CnnSpec":
        """Spec whose blocks share kernel and pool lengths (the flat settings layout)."""
        blocks = [ConvBlock(filters=f, kernel_length=kernel_length, pool_length=pool_length) for f in filters]
        return cls(conv_blocks=blocks, **kwargs)

    @model_validator(mode="after")
    def check_lengths(self) -> "CnnSpec":
        if self.input_length is None:
            return self
        length = self.input_length
        for i, block in enumerate(self.conv_blocks):
            if block.kernel_length > length or block.pool_length > length:
                raise ValueError(f"block {i}: kernel/pool longer than the feature length {length}")
            length //= block.pool_length
        return self


ClassifierSpec = MlpSpec | CnnSpec


@dataclass
class ClassifierModel:
    """A trained MLP or CNN attacker."""

    spec: ClassifierSpec
    network: Network
    input_length: int
    stats: Optional[StandardizationStats] = None
    training_log: list[float] = field(default_factory=list)  # mean loss per epoch

    @property
    def n_classes(self) -> int:
        return self.spec.n_classes

    @property
    def kind(self) -> str:
        return self.spec.kind

    def predict_proba(self, traces: np.ndarray) -> np.ndarray:
        traces = np.atleast_2d(np.asarray(traces, dtype=self.network.dtype))
        return softmax(self.network.forward(traces, cache=False).astype(np.float64), axis=1)
