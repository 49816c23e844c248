"""
Insertion-point search: a trigger_low probe is moved through the program by binary search until its sentinel lands on
the targeted trace sample.
"""

import logging
from typing import Optional, Sequence

from app.countermeasure.models import InsertionPoint, ProbeRecord
from app.errors import CountermeasureError
from app.vm.assembler import ANNOTATION_PREFIX, insert_instruction
from app.vm.executor import MemoryInit, execute
from app.vm.models import NOISE_SLOT_TAG, DeviceConfig, Instruction, Program

logger = logging.getLogger(__name__)

PROBE = Instruction("trigger_low")


def probe_sentinel(
    program: Program, index: int, config: DeviceConfig, memory_init: Optional[MemoryInit] = None
) -> int:
    """Sample position, in the capture window, of a trigger_low inserted right after instruction `index`."""
    quiet = config.model_copy(update={"noise_sigma": 0.0})
    trace, _ = execute(insert_instruction(program, index, PROBE), memory_init, quiet)
    return trace.sentinel_position(config.trigger_low_level)


def search_range(program: Program) -> tuple[int, int]:
    """First and last instruction a probe may follow: from trigger_high to the instruction before trigger_low."""
    first = max(0, program.index_of("trigger_high"))
    end = program.index_of("trigger_low")
    last = (end if end != -1 else len(program)) - 1
    if last < first:
        raise CountermeasureError("the program has no instruction inside its capture window")
    return first, last


def locate_insertion_points(
    program: Program,
    targets: Sequence[int],
    config: DeviceConfig,
    tolerance_cycles: int = 2,
    memory_init: Optional[MemoryInit] = None,
) -> list[InsertionPoint]:
    """Find, for every target sample, the smallest instruction index whose probe lands at or after the target.

    Args:
        program (Program): Unprotected program.
        targets (Sequence[int]): Target sample positions in the capture window.
        config (DeviceConfig): Device configuration (probes run noise-free).
        tolerance_cycles (int, optional): Distance, in cycles, beyond which a landing is reported as imprecise.
            Defaults to 2.
        memory_init (Optional[MemoryInit], optional): Initial memory of the probe runs. Defaults to None.

    Raises:
        CountermeasureError: A target lies beyond the last probe position.

    Returns:
        list[InsertionPoint]: One point per target, in the order of `targets`, with its probe log.
    """
    first, last = search_range(program)
    tolerance = tolerance_cycles * config.samples_per_cycle
    cache: dict[int, int] = {}

    def sentinel(index: int) -> int:
        if index not in cache:
            cache[index] = probe_sentinel(program, index, config, memory_init)
        return cache[index]

    points = []
    for target in targets:
        if target < 0:
            raise CountermeasureError(f"target sample {target} is negative")
        probes: list[ProbeRecord] = []

        def probe(index: int) -> int:
            landed = sentinel(index)
            probes.append(ProbeRecord(target_sample=target, iteration=len(probes), index=index, sentinel_sample=landed))
            return landed

        if probe(last) < target:
            raise CountermeasureError(
                f"target sample {target} is unreachable: a probe after the last instruction lands at {sentinel(last)}"
            )
        low, high = first, last
        while low < high:
            middle = (low + high) // 2
            if probe(middle) >= target:
                high = middle
            else:
                low = middle + 1

        observed = sentinel(low)
        if abs(observed - target) > tolerance:
            logger.warning(f"Insertion point for sample {target} lands at {observed}, beyond ±{tolerance} samples")
        points.append(
            InsertionPoint(instruction_index=low, target_sample=target, observed_sample=observed, probes=probes)
        )
        logger.debug(f"Sample {target} -> after instruction {low} ({len(probes)} probes)")
    return points


def annotate_source(source: str, indices: Sequence[int], tag: str = NOISE_SLOT_TAG) -> str:
    """Add a `tag` line right after the statement of every instruction index, keeping comments and layout."""
    wanted = sorted(indices)
    lines = []
    count = 0
    for line in source.splitlines():
        lines.append(line)
        statement = line.strip()
        if statement.startswith(ANNOTATION_PREFIX) or not statement.split(";", 1)[0].strip():
            continue
        lines.extend(tag for index in wanted if index == count)
        count += 1
    missing = [index for index in wanted if index >= count]
    if missing:
        raise CountermeasureError(f"instruction indices {missing} are beyond the {count} instructions of the source")
    return "\n".join(lines) + "\n"
