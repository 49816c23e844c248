"""
Power profile of a candidate instruction inserted in a program, in standardized amplitude units.
"""

from dataclasses import dataclass
import logging
from typing import Optional

import numpy as np

from app.dataset.models import StandardizationStats
from app.errors import DatasetError, ExecutionError
from app.utils import derive_seed
from app.vm.assembler import insert_instruction
from app.vm.executor import MemoryInit, execute
from app.vm.models import DeviceConfig, Instruction, Program

logger = logging.getLogger(__name__)


@dataclass
class InstructionProfile:
    """Standardized amplitude of the samples written by an inserted instruction.

    `mean` and `sd` are taken over repetitions of the per-run amplitude; `baseline_mean` is the standardized amplitude
    the program without the instruction shows at the same samples.
    """

    instruction: Instruction
    position: int
    sample_positions: list[int]
    mean: float
    sd: float
    baseline_mean: float

    @property
    def delta(self) -> float:
        return self.mean - self.baseline_mean


def measure_instruction_profile(
    instr: Instruction,
    context: Program,
    position: int,
    config: DeviceConfig,
    repetitions: int,
    stats: Optional[StandardizationStats],
    memory_init: Optional[MemoryInit] = None,
) -> InstructionProfile:
    """Profile `instr` inserted right after instruction `position` of `context`.

    Args:
        instr (Instruction): Candidate instruction.
        context (Program): Program hosting the instruction.
        position (int): Index of the instruction after which `instr` is inserted.
        config (DeviceConfig): Device configuration. Run r uses the seed derived from (`config.rng_seed`, r).
        repetitions (int): Number of runs.
        stats (Optional[StandardizationStats]): Standardization statistics of the baseline program's traces.
        memory_init (Optional[MemoryInit], optional): Initial memory of every run. Defaults to None.

    Raises:
        DatasetError: No standardization statistics.
        ExecutionError: The instruction's samples fall outside the capture window.

    Returns:
        InstructionProfile: Amplitude statistics.
    """
    if stats is None:
        raise DatasetError("missing standardization statistics: standardize a dataset of the baseline program first")
    if not 0 <= position < len(context):
        raise ValueError(f"position {position} is not an instruction of the program")

    probed = insert_instruction(context, position, instr)
    spc = config.samples_per_cycle
    amplitudes, baselines = [], []
    positions = np.empty(0, dtype=int)
    for r in range(repetitions):
        run_config = config.with_seed(derive_seed(config.rng_seed, "profile", r))
        trace, state = execute(probed, memory_init, run_config)
        last_cycle = state.events[position + 1].start_cycle + instr.cycles - 1
        first = last_cycle * spc - trace.trigger_window[0]
        positions = np.arange(first, first + spc)
        base_trace, _ = execute(context, memory_init, run_config)
        if first < 0 or positions[-1] >= min(len(base_trace), stats.n):
            raise ExecutionError(f"`{instr}` after instruction {position} lands outside the capture window")
        amplitudes.append(stats.standardize_at(trace.samples[positions], positions).mean())
        baselines.append(stats.standardize_at(base_trace.samples[positions], positions).mean())

    profile = InstructionProfile(
        instruction=instr,
        position=position,
        sample_positions=positions.tolist(),
        mean=float(np.mean(amplitudes)),
        sd=float(np.std(amplitudes)),
        baseline_mean=float(np.mean(baselines)),
    )
    logger.debug(f"Profile of `{instr}` after instruction {position}: {profile.mean:.3f} ± {profile.sd:.3f}")
    return profile
