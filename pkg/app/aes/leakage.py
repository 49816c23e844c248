"""
Leakage-model labels: LSB or Hamming weight of Sbox(p[b] ^ k[b]).
"""

import numpy as np

from app.aes.models import LeakageModel
from app.aes.reference import SBOX
from app.utils import HAMMING_WEIGHT

# Label of every S-box input, per leakage kind
LABEL_TABLES: dict[str, np.ndarray] = {
    "LSB": (SBOX & 1).astype(np.uint8),
    "HW": HAMMING_WEIGHT[SBOX],
}


def label_of(plaintext: bytes, key: bytes, model: LeakageModel) -> int:
    b = model.byte_index
    return int(LABEL_TABLES[model.kind][plaintext[b] ^ key[b]])


def labels_of(plaintexts: np.ndarray, keys: np.ndarray, model: LeakageModel) -> np.ndarray:
    """Vectorized `label_of` over (N, 16) byte arrays."""
    b = model.byte_index
    return LABEL_TABLES[model.kind][np.asarray(plaintexts)[:, b] ^ np.asarray(keys)[:, b]]


def hypothesis_labels(plaintexts: np.ndarray, model: LeakageModel) -> np.ndarray:
    """(N, 256) labels of every plaintext under every candidate value of the attacked key byte."""
    candidates = np.arange(256, dtype=np.uint8)
    return LABEL_TABLES[model.kind][np.asarray(plaintexts)[:, model.byte_index, None] ^ candidates[None, :]]


def sensitive_hamming_weight(plaintexts: np.ndarray, keys: np.ndarray, model: LeakageModel) -> np.ndarray:
    """HW(Sbox(p[b] ^ k[b])) whatever the leakage kind, target of the correlation analysis."""
    b = model.byte_index
    return HAMMING_WEIGHT[SBOX[np.asarray(plaintexts)[:, b] ^ np.asarray(keys)[:, b]]]
