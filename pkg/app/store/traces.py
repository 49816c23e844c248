"""
SCT1 trace files.

Layout (little-endian):
    magic   4s   b"SCT1"
    N       u32  trace count
    n       u32  samples per trace
    kind    u8   leakage kind (0: LSB, 1: HW)
    byte    u8   attacked byte index
    key     16s  fixed key, zeros for random-key campaigns
    policy  u8   key policy (0: fixed, 1: random)
then N records of {16-byte plaintext, 16-byte key, u8 label, n x float32 samples}.
"""

from pathlib import Path
import struct

import numpy as np

from app.aes.models import LeakageModel
from app.dataset.models import Dataset
from app.errors import DatasetError

MAGIC = b"SCT1"
HEADER = struct.Struct("<4sIIBB16sB")
LEAKAGE_KINDS = ("LSB", "HW")
KEY_POLICIES = ("fixed", "random")


def record_dtype(n: int) -> np.dtype:
    return np.dtype([("plaintext", "u1", 16), ("key", "u1", 16), ("label", "u1"), ("samples", "<f4", n)])


def write_dataset(path: str | Path, dataset: Dataset) -> Path:
    """Write a dataset as an SCT1 file. Samples are stored as float32."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fixed_key = dataset.fixed_key if dataset.key_policy == "fixed" else None
    header = HEADER.pack(
        MAGIC,
        len(dataset),
        dataset.n,
        LEAKAGE_KINDS.index(dataset.leakage_model.kind),
        dataset.leakage_model.byte_index,
        fixed_key or bytes(16),
        KEY_POLICIES.index(dataset.key_policy),
    )
    records = np.empty(len(dataset), dtype=record_dtype(dataset.n))
    records["plaintext"] = dataset.plaintexts
    records["key"] = dataset.keys
    records["label"] = dataset.labels
    records["samples"] = dataset.traces
    with path.open("wb") as f:
        f.write(header)
        f.write(records.tobytes())
    return path


def read_dataset(path: str | Path) -> Dataset:
    """Read an SCT1 file.

    Raises:
        DatasetError: Bad magic, unknown enumerations or truncated payload.
    """
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise DatasetError(f"{path}: truncated header")
    magic, count, n, kind, byte_index, _, policy = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DatasetError(f"{path}: not an SCT1 trace file")
    if kind >= len(LEAKAGE_KINDS) or policy >= len(KEY_POLICIES):
        raise DatasetError(f"{path}: unknown leakage kind {kind} or key policy {policy}")
    dtype = record_dtype(n)
    if len(data) != HEADER.size + count * dtype.itemsize:
        raise DatasetError(f"{path}: expected {count} records of {dtype.itemsize} bytes")

    records = np.frombuffer(data, dtype=dtype, offset=HEADER.size, count=count)
    return Dataset(
        traces=records["samples"].copy(),
        plaintexts=records["plaintext"].copy(),
        keys=records["key"].copy(),
        labels=records["label"].copy(),
        leakage_model=LeakageModel(kind=LEAKAGE_KINDS[kind], byte_index=byte_index),
        key_policy=KEY_POLICIES[policy],
    )
