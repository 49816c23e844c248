from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from app.vm.typings import Opcode, OperandKind, UninitializedPolicy

REGISTER_COUNT = 32
MEMORY_SIZE = 1 << 16
NOISE_SLOT_TAG = ";@noise-slot"

# Cycle cost of every opcode
CYCLE_COSTS: dict[str, int] = {
    "mov": 1,
    "ldi": 1,
    "ld": 2,
    "st": 2,
    "eor": 1,
    "and": 1,
    "or": 1,
    "ori": 1,
    "add": 1,
    "sub": 1,
    "in": 1,
    "nop": 1,
    "trigger_high": 1,
    "trigger_low": 1,
}

# Accepted source operand kinds per opcode
OPERAND_FORMS: dict[str, tuple[OperandKind, ...]] = {
    "mov": ("reg", "imm"),
    "ldi": ("imm",),
    "ld": ("mem",),
    "st": ("mem",),
    "eor": ("reg",),
    "and": ("reg",),
    "or": ("reg",),
    "ori": ("imm",),
    "add": ("reg",),
    "sub": ("reg",),
    "in": ("imm",),
    "nop": ("none",),
    "trigger_high": ("none",),
    "trigger_low": ("none",),
}

# Opcodes that never write a register
NON_WRITING = frozenset({"st", "nop", "trigger_high", "trigger_low"})


@dataclass(frozen=True)
class Instruction:
    """One VM instruction.

    `dst` is the destination register, except for `st` where it names the register whose value is stored. `src` is a
    register index, an 8-bit immediate or a memory address depending on `src_kind`. Memory operands may be indexed by
    the register `index` (effective address = `src + r[index]`).
    """

    opcode: Opcode
    dst: Optional[int] = None
    src: Optional[int] = None
    src_kind: OperandKind = "none"
    index: Optional[int] = None

    def __post_init__(self):
        if self.opcode not in CYCLE_COSTS:
            raise ValueError(f"unknown opcode `{self.opcode}`")
        if self.src_kind not in OPERAND_FORMS[self.opcode]:
            raise ValueError(f"`{self.opcode}` does not accept a `{self.src_kind}` operand")
        if self.src_kind == "none":
            if self.dst is not None or self.src is not None or self.index is not None:
                raise ValueError(f"`{self.opcode}` takes no operands")
            return
        self._check_register(self.dst, "register")
        if self.src_kind == "reg":
            self._check_register(self.src, "source register")
        elif self.src_kind == "imm":
            if self.src is None or not 0 <= self.src <= 0xFF:
                raise ValueError(f"immediate {self.src} does not fit in 8 bits")
        elif self.src_kind == "mem":
            if self.src is None or not 0 <= self.src < MEMORY_SIZE:
                raise ValueError(f"address {self.src} outside the 64 KiB memory")
        if self.index is not None:
            if self.src_kind != "mem":
                raise ValueError("only memory operands can be indexed")
            self._check_register(self.index, "index register")

    @staticmethod
    def _check_register(x: Optional[int], what: str) -> None:
        if x is None or not 0 <= x < REGISTER_COUNT:
            raise ValueError(f"{what} r{x} out of range (r0-r{REGISTER_COUNT - 1})")

    @property
    def cycles(self) -> int:
        return CYCLE_COSTS[self.opcode]

    @property
    def writes_register(self) -> bool:
        return self.opcode not in NON_WRITING

    def __str__(self) -> str:
        if self.src_kind == "none":
            return self.opcode
        if self.src_kind == "reg":
            return f"{self.opcode} r{self.dst}, r{self.src}"
        if self.src_kind == "imm":
            return f"{self.opcode} r{self.dst}, 0x{self.src:02x}"
        address = f"0x{self.src:04x}" + (f"[r{self.index}]" if self.index is not None else "")
        if self.opcode == "st":
            return f"st {address}, r{self.dst}"
        return f"{self.opcode} r{self.dst}, {address}"


@dataclass
class Program:
    instructions: list[Instruction]
    annotations: list[tuple[int, str]] = field(default_factory=list)
    source_text: str = field(default="", compare=False)

    def __post_init__(self):
        for index, tag in self.annotations:
            if not 0 <= index <= len(self.instructions):
                raise ValueError(f"annotation `{tag}` at {index} is not an instruction boundary")

    def __len__(self) -> int:
        return len(self.instructions)

    @property
    def cycle_count(self) -> int:
        """Cycles of a complete straight-line run."""
        return sum(instruction.cycles for instruction in self.instructions)

    def annotation_indices(self, tag: str = NOISE_SLOT_TAG) -> list[int]:
        return [index for index, t in self.annotations if t == tag]

    def index_of(self, opcode: Opcode) -> int:
        """Index of the first instruction with the given opcode, -1 if absent."""
        return next((i for i, instruction in enumerate(self.instructions) if instruction.opcode == opcode), -1)


class DeviceConfig(BaseModel):
    """Parameters of the simulated device and its power model."""

    hw_gain: float = Field(1.0, description="Power per Hamming-weight unit")
    baseline: float = Field(0.0, description="Power of a cycle writing nothing")
    noise_sigma: float = Field(1.0, ge=0, description="Standard deviation of the Gaussian sample noise")
    samples_per_cycle: int = Field(3, ge=1)
    trigger_low_level: float = Field(-10.0, description="Sentinel sample value of a trigger_low cycle")
    rng_seed: int = Field(0, ge=0, lt=1 << 64)
    cycle_budget: int = Field(100_000, ge=1)
    uninitialized: UninitializedPolicy = "zero"
    in_port_value: int = Field(0xFF, ge=0, le=0xFF, description="Value written by `in`")
    store_leakage: bool = Field(False, description="Whether `st` leaks the Hamming weight of the stored byte")

    def with_seed(self, rng_seed: int) -> "DeviceConfig":
        return self.model_copy(update={"rng_seed": rng_seed})


@dataclass
class ExecutionEvent:
    """Log entry of an executed instruction."""

    index: int
    start_cycle: int
    value: Optional[int]  # value written to the destination, None when nothing is written


@dataclass
class MachineState:
    registers: list[int]
    memory: bytearray
    cycle_count: int
    events: list[ExecutionEvent] = field(default_factory=list)

    def read(self, address: int, count: int) -> bytes:
        return bytes(self.memory[address : address + count])


@dataclass
class RawTrace:
    """Captured power samples.

    `trigger_window` holds the (start, end) sample positions of the capture window in the complete run, so
    `len(samples) == end - start`.
    """

    samples: np.ndarray
    cycle_count: int
    trigger_window: tuple[int, int]

    def __len__(self) -> int:
        return len(self.samples)

    def sentinel_position(self, level: float) -> int:
        """Position of the first trigger_low sentinel sample, -1 if none was captured."""
        positions = np.flatnonzero(self.samples == level)
        return int(positions[0]) if len(positions) else -1
