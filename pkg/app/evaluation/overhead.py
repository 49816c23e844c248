"""
Execution overhead of the program variants, measured in VM cycles.
"""

import logging
from typing import Mapping, Optional

import numpy as np

from app.aes.codegen import memory_image
from app.countermeasure.insertion import ProtectedProgram
from app.dataset.acquisition import RecompilingProgram
from app.evaluation.models import OverheadRow
from app.utils import derive_seed, progress
from app.vm.executor import execute
from app.vm.models import DeviceConfig, Program

logger = logging.getLogger(__name__)


def execution_overhead(
    variants: Mapping[str, Program | RecompilingProgram],
    runs: int,
    seed: int = 0,
    config: Optional[DeviceConfig] = None,
) -> list[OverheadRow]:
    """Min, average and max cycle counts of `runs` executions of every variant.

    Recompiling variants get a new invocation seed at every run; every run encrypts a fresh random plaintext.
    """
    if runs < 1:
        raise ValueError("at least one run is required")
    config = (config or DeviceConfig()).model_copy(update={"noise_sigma": 0.0})
    rows = []
    for name, variant in variants.items():
        cycles = np.empty(runs, dtype=np.int64)
        for r in progress(range(runs), desc=f"overhead {name}"):
            run_seed = derive_seed(seed, "overhead", r)
            program = variant if isinstance(variant, Program) else variant.compile(derive_seed(run_seed, "compile"))
            rng = np.random.default_rng(run_seed)
            plaintext, key = rng.bytes(16), rng.bytes(16)
            _, state = execute(program, memory_image(plaintext, key), config)
            cycles[r] = state.cycle_count
        rows.append(
            OverheadRow(
                variant=name,
                runs=runs,
                min_cycles=int(cycles.min()),
                avg_cycles=float(cycles.mean()),
                max_cycles=int(cycles.max()),
            )
        )
        logger.info(f"{name}: {rows[-1].min_cycles}/{rows[-1].avg_cycles:.2f}/{rows[-1].max_cycles} cycles")
    return rows


def analytic_spread(protected: ProtectedProgram) -> int:
    """Largest possible max - min cycle count: every slot at the largest ω with the slowest noise instruction versus
    every slot at the smallest ω with the fastest one."""
    cycles = protected.noise_cycles
    if not cycles:
        return 0
    omega_max, omega_min = max(protected.policy.omega_domain), min(protected.policy.omega_domain)
    return len(protected.points) * (omega_max * max(cycles) - omega_min * min(cycles))
