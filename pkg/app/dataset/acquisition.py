"""
Trace acquisition campaigns on the simulated device.
"""

from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Protocol, runtime_checkable

import numpy as np

from app.aes.codegen import memory_image
from app.aes.leakage import labels_of
from app.aes.models import LeakageModel
from app.dataset.models import Campaign, Dataset
from app.errors import DatasetError
from app.utils import derive_seed, progress
from app.vm.executor import execute
from app.vm.models import Program

logger = logging.getLogger(__name__)


@runtime_checkable
class RecompilingProgram(Protocol):
    """A program whose code is regenerated from an invocation seed (e.g. a noise-protected program)."""

    def compile(self, invocation_seed: int) -> Program: ...


def acquire(
    program: Program | RecompilingProgram, campaign: Campaign, leakage_model: LeakageModel, threads: int = 1
) -> Dataset:
    """Run the program `campaign.count` times with fresh inputs and capture one trace per run.

    A recompiling program is recompiled before every run when `campaign.recompile_each_run` is set, and once for the
    whole campaign otherwise. Captures are padded to `campaign.length_cap` samples with baseline-plus-noise samples.

    Args:
        program (Program | RecompilingProgram): Program under test.
        campaign (Campaign): Campaign parameters.
        leakage_model (LeakageModel): Labeling of the traces.
        threads (int, optional): Number of concurrent runs. Defaults to 1.

    Raises:
        DatasetError: A capture is longer than the length cap.

    Returns:
        Dataset: Raw (unstandardized) float32 traces with their records.
    """
    fixed_key = campaign.key_bytes()
    config = campaign.config
    cap = campaign.length_cap
    static_program = None
    if isinstance(program, Program):
        static_program = program
    elif not campaign.recompile_each_run:
        static_program = program.compile(derive_seed(campaign.seed, "compile"))

    def run(i: int) -> tuple[np.ndarray, bytes, bytes, int]:
        seed = derive_seed(campaign.seed, "run", i)
        rng = np.random.default_rng(seed)
        plaintext = rng.integers(0, 256, 16, dtype=np.uint8).tobytes()
        key = fixed_key if fixed_key is not None else rng.integers(0, 256, 16, dtype=np.uint8).tobytes()
        current = static_program if static_program is not None else program.compile(derive_seed(seed, "compile"))
        trace, _ = execute(current, memory_image(plaintext, key), config.with_seed(derive_seed(seed, "device")))
        if len(trace) > cap:
            raise DatasetError(f"trace of {len(trace)} samples exceeds the length cap of {cap}")
        padded = np.empty(cap, dtype=np.float32)
        padded[: len(trace)] = trace.samples
        padded[len(trace) :] = config.baseline + rng.normal(0.0, config.noise_sigma, cap - len(trace))
        return padded, plaintext, key, len(trace)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        runs = list(progress(pool.map(run, range(campaign.count)), total=campaign.count, desc="acquire"))

    traces = np.stack([r[0] for r in runs])
    plaintexts = np.frombuffer(b"".join(r[1] for r in runs), dtype=np.uint8).reshape(-1, 16).copy()
    keys = np.frombuffer(b"".join(r[2] for r in runs), dtype=np.uint8).reshape(-1, 16).copy()
    lengths = np.array([r[3] for r in runs])
    logger.info(
        f"Acquired {campaign.count} traces ({campaign.key_policy} key), "
        f"capture lengths {lengths.min()}-{lengths.max()} padded to {cap}"
    )
    return Dataset(
        traces=traces,
        plaintexts=plaintexts,
        keys=keys,
        labels=labels_of(plaintexts, keys, leakage_model),
        leakage_model=leakage_model,
        key_policy=campaign.key_policy,
        lengths=lengths,
    )
