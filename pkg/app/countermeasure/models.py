from dataclasses import dataclass, field
from typing import Any

from pydantic import BaseModel, Field, field_validator

from app.vm.models import Instruction
from app.vm.profile import InstructionProfile


@dataclass
class ProbeRecord:
    """One step of an insertion-point search: a trigger_low probed after instruction `index`."""

    target_sample: int
    iteration: int
    index: int
    sentinel_sample: int


@dataclass
class InsertionPoint:
    """Noise slot located right after instruction `instruction_index`.

    `observed_sample` is where a probe placed there shows its sentinel in the capture window.
    """

    instruction_index: int
    target_sample: int
    observed_sample: int
    probes: list[ProbeRecord] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict[str, int]:
        return {
            "instruction_index": self.instruction_index,
            "target_sample": self.target_sample,
            "observed_sample": self.observed_sample,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InsertionPoint":
        return cls(
            instruction_index=int(data["instruction_index"]),
            target_sample=int(data["target_sample"]),
            observed_sample=int(data["observed_sample"]),
        )


@dataclass
class NoiseSet:
    """Selected noise instructions with their profiles at the insertion points (one profile per member and point)."""

    members: list[Instruction]
    profiles: list[list[InstructionProfile]] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def texts(self) -> list[str]:
        return [str(instruction) for instruction in self.members]

    def mean_amplitudes(self) -> list[float]:
        return [sum(p.mean for p in profiles) / len(profiles) for profiles in self.profiles]

    def mean_deltas(self) -> list[float]:
        return [sum(p.delta for p in profiles) / len(profiles) for profiles in self.profiles]


class InsertionPolicy(BaseModel):
    """How many noise instructions each slot receives per compilation.

    ω is drawn uniformly from `omega_domain`, independently per slot or once for all slots.
    """

    omega_domain: list[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    per_point_independent: bool = True
    seed: int = Field(0, description="Combined with each invocation seed")

    @field_validator("omega_domain")
    @classmethod
    def check_domain(cls, v: list[int]) -> list[int]:
        if any(omega < 0 for omega in v):
            raise ValueError("ω values must be non-negative")
        return v

