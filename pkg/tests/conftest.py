from typing import Optional

import numpy as np
import pytest

from app.aes.codegen import first_round_program
from app.aes.leakage import labels_of, sensitive_hamming_weight
from app.aes.models import LeakageModel
from app.dataset.models import Dataset, StandardizationStats
from app.settings import reset_settings
from app.vm.assembler import assemble
from app.vm.models import DeviceConfig, Program

FIXED_KEY = bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size correctness sweeps, deselect with -m \"not slow\"")


@pytest.fixture(autouse=True)
def clean_settings():
    """Every test starts from the default settings, without APP_ variables."""
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def quiet_device() -> DeviceConfig:
    return DeviceConfig(noise_sigma=0.0)


@pytest.fixture(scope="session")
def aes_program() -> Program:
    return assemble(first_round_program())


def nop_program(count: int) -> Program:
    return assemble("trigger_high\n" + "nop\n" * count + "trigger_low\n")


@pytest.fixture
def nop_window():
    return nop_program


def synthetic_dataset(
    count: int,
    n: int = 8,
    leakage: LeakageModel = LeakageModel(),
    key: Optional[bytes] = None,
    signal: float = 3.0,
    position: int = 3,
    seed: int = 0,
) -> Dataset:
    """Gaussian noise traces whose sample `position` carries `signal` times the label."""
    rng = np.random.default_rng(seed)
    plaintexts = rng.integers(0, 256, (count, 16), dtype=np.uint8)
    if key is None:
        keys = rng.integers(0, 256, (count, 16), dtype=np.uint8)
    else:
        keys = np.tile(np.frombuffer(key, dtype=np.uint8), (count, 1))
    labels = labels_of(plaintexts, keys, leakage)
    traces = rng.normal(0.0, 1.0, (count, n))
    traces[:, position] += signal * labels
    return Dataset(
        traces=traces.astype(np.float32),
        plaintexts=plaintexts,
        keys=keys,
        labels=labels,
        leakage_model=leakage,
        key_policy="random" if key is None else "fixed",
    )


def hw_dataset(count: int, n: int = 6, position: int = 2, seed: int = 0) -> Dataset:
    """Fixed-key traces whose sample `position` is exactly HW(Sbox(p ^ k)) of the attacked byte, zeros elsewhere."""
    dataset = synthetic_dataset(count, n=n, key=FIXED_KEY, signal=0.0, seed=seed)
    traces = np.zeros((count, n), dtype=np.float32)
    traces[:, position] = sensitive_hamming_weight(dataset.plaintexts, dataset.keys, dataset.leakage_model)
    return dataset.with_traces(traces)


@pytest.fixture
def make_dataset():
    return synthetic_dataset


@pytest.fixture
def make_hw_dataset():
    return hw_dataset


@pytest.fixture
def unit_stats():
    """Identity standardization over n samples."""

    def build(n: int) -> StandardizationStats:
        return StandardizationStats(mean=np.zeros(n), sd=np.ones(n))

    return build
