"""
The insertion pass: every `;@noise-slot` annotation of a source is replaced by ω noise instructions, drawn afresh at
every compilation.
"""

from dataclasses import dataclass
import logging
from typing import Any, Optional, Sequence

import numpy as np

from app.countermeasure.locate import annotate_source, probe_sentinel, search_range
from app.countermeasure.models import InsertionPoint, InsertionPolicy, NoiseSet
from app.errors import CountermeasureError
from app.typings import Implementation
from app.utils import derive_seed
from app.vm.assembler import assemble, disassemble, parse_instruction
from app.vm.executor import MemoryInit
from app.vm.models import NOISE_SLOT_TAG, DeviceConfig, Instruction, Program

logger = logging.getLogger(__name__)


def _is_slot(line: str) -> bool:
    stripped = line.strip()
    return stripped == NOISE_SLOT_TAG or stripped.startswith(NOISE_SLOT_TAG + " ")


def insert_noise(
    annotated_source: str,
    points: Sequence[InsertionPoint] | int,
    noise_set: NoiseSet | Sequence[Instruction],
    policy: InsertionPolicy,
    invocation_seed: int,
) -> str:
    """Replace every noise slot with ω instructions drawn uniformly, with replacement, from the noise set.

    Args:
        annotated_source (str): Source carrying one `;@noise-slot` line per insertion point.
        points (Sequence[InsertionPoint] | int): Insertion points, or their count.
        noise_set (NoiseSet | Sequence[Instruction]): Noise instructions.
        policy (InsertionPolicy): ω domain and sampling mode.
        invocation_seed (int): Seed of this compilation, combined with `policy.seed`.

    Raises:
        CountermeasureError: Slot count differs from the point count, or ω > 0 with an empty noise set.

    Returns:
        str: Protected source, without slot annotations.
    """
    expected = points if isinstance(points, int) else len(points)
    lines = annotated_source.splitlines()
    slots = sum(_is_slot(line) for line in lines)
    if slots != expected:
        raise CountermeasureError(f"the source carries {slots} noise slots for {expected} insertion points")
    noise = [str(instruction) for instruction in (noise_set.members if isinstance(noise_set, NoiseSet) else noise_set)]

    rng = np.random.default_rng(derive_seed(policy.seed, "insert", invocation_seed))
    domain = np.asarray(policy.omega_domain)
    if policy.per_point_independent:
        omegas = rng.choice(domain, size=slots)
    else:
        omegas = np.full(slots, rng.choice(domain))
    if omegas.sum() > 0 and not noise:
        raise CountermeasureError("the noise set is empty")

    output, slot = [], 0
    for line in lines:
        if not _is_slot(line):
            output.append(line)
            continue
        if noise:
            output.extend(noise[i] for i in rng.integers(0, len(noise), size=omegas[slot]))
        slot += 1
    return "\n".join(output) + "\n"


@dataclass
class ProtectedProgram:
    """An annotated program recompiled with fresh noise at every invocation."""

    annotated_source: str
    noise: list[str]
    policy: InsertionPolicy
    points: list[InsertionPoint]
    implementation: Implementation = "protected"

    @property
    def noise_set(self) -> NoiseSet:
        return NoiseSet(members=[parse_instruction(text) for text in self.noise])

    @property
    def noise_cycles(self) -> list[int]:
        return [instruction.cycles for instruction in self.noise_set.members]

    def source(self, invocation_seed: int) -> str:
        return insert_noise(self.annotated_source, self.points, self.noise_set, self.policy, invocation_seed)

    def compile(self, invocation_seed: int) -> Program:
        return assemble(self.source(invocation_seed))

    def to_dict(self) -> dict[str, Any]:
        return {
            "implementation": self.implementation,
            "annotated_source": self.annotated_source,
            "noise": self.noise,
            "policy": self.policy.model_dump(),
            "points": [point.to_dict() for point in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProtectedProgram":
        return cls(
            annotated_source=data["annotated_source"],
            noise=list(data["noise"]),
            policy=InsertionPolicy.model_validate(data["policy"]),
            points=[InsertionPoint.from_dict(point) for point in data["points"]],
            implementation=data["implementation"],
        )


def protect(
    program: Program, points: Sequence[InsertionPoint], noise_set: NoiseSet, policy: InsertionPolicy
) -> ProtectedProgram:
    """Annotate the program at the insertion points and bind it to its noise set."""
    source = program.source_text or disassemble(program)
    annotated = annotate_source(source, [point.instruction_index for point in points])
    return ProtectedProgram(annotated_source=annotated, noise=noise_set.texts, policy=policy, points=list(points))


def random_noise_program(
    program: Program,
    count: int,
    pool: Sequence[Instruction],
    policy: InsertionPolicy,
    seed: int,
    config: Optional[DeviceConfig] = None,
    memory_init: Optional[MemoryInit] = None,
) -> ProtectedProgram:
    """Control implementation: noise slots at random places of the capture window, filled from a random part of a
    pool of common instructions instead of profile-selected ones.

    Args:
        program (Program): Unprotected program.
        count (int): Number of slots.
        pool (Sequence[Instruction]): Common instructions to pick the noise from.
        policy (InsertionPolicy): ω policy of the slots.
        seed (int): Seed of the slot and instruction choice.
        config (Optional[DeviceConfig], optional): When given, the slots' sample positions are probed. Defaults to
            None (positions recorded as -1).
        memory_init (Optional[MemoryInit], optional): Initial memory of the probe runs. Defaults to None.

    Returns:
        ProtectedProgram: Program recompiled with random noise at every invocation.
    """
    first, last = search_range(program)
    if not 1 <= count <= last - first + 1:
        raise CountermeasureError(f"cannot place {count} random slots among {last - first + 1} instructions")
    if not pool:
        raise CountermeasureError("the instruction pool is empty")
    rng = np.random.default_rng(derive_seed(seed, "random-noise"))
    indices = np.sort(rng.choice(np.arange(first, last + 1), size=count, replace=False))
    picked = rng.choice(len(pool), size=max(1, len(pool) // 2), replace=False)
    noise = [pool[i] for i in np.sort(picked)]

    points = []
    for index in indices.tolist():
        sample = probe_sentinel(program, index, config, memory_init) if config is not None else -1
        points.append(InsertionPoint(instruction_index=index, target_sample=sample, observed_sample=sample))
    logger.info(f"Random-noise slots after instructions {indices.tolist()}, noise {[str(x) for x in noise]}")
    return ProtectedProgram(
        annotated_source=annotate_source(program.source_text or disassemble(program), indices.tolist()),
        noise=[str(x) for x in noise],
        policy=policy,
        points=points,
        implementation="random_noise",
    )
