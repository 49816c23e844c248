"""
Reference AES-128 (FIPS-197) used as the oracle of the generated VM code.

State bytes are column-major: byte i sits at row i % 4, column i // 4.
"""

import numpy as np


def xtime(a: int) -> int:
    """Multiplication by x (i.e. 0x02) in GF(2^8)."""
    a <<= 1
    return (a ^ 0x11B) if a & 0x100 else a


def gf_mul(a: int, b: int) -> int:
    p = 0
    while b:
        if b & 1:
            p ^= a
        a = xtime(a)
        b >>= 1
    return p


def _sbox_entry(a: int) -> int:
    inverse = 1
    for _ in range(254):  # a^254 = a^-1, and 0 maps to 0
        inverse = gf_mul(inverse, a)
    inverse = inverse if a else 0
    rotl = lambda x, n: ((x << n) | (x >> (8 - n))) & 0xFF  # noqa: E731
    return inverse ^ rotl(inverse, 1) ^ rotl(inverse, 2) ^ rotl(inverse, 3) ^ rotl(inverse, 4) ^ 0x63


SBOX = np.array([_sbox_entry(a) for a in range(256)], dtype=np.uint8)
XTIME = np.array([xtime(a) for a in range(256)], dtype=np.uint8)
RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)


def sbox(a: int) -> int:
    return int(SBOX[a])


def shift_rows_position(i: int) -> int:
    """Position that state byte i moves to under ShiftRows."""
    row, column = i % 4, i // 4
    return row + 4 * ((column - row) % 4)


def add_round_key(state: list[int], round_key: bytes) -> list[int]:
    return [s ^ k for s, k in zip(state, round_key)]


def sub_bytes(state: list[int]) -> list[int]:
    return [sbox(s) for s in state]


def shift_rows(state: list[int]) -> list[int]:
    shifted = [0] * 16
    for i, s in enumerate(state):
        shifted[shift_rows_position(i)] = s
    return shifted


def mix_columns(state: list[int]) -> list[int]:
    mixed = []
    for c in range(4):
        a = state[4 * c : 4 * c + 4]
        t = a[0] ^ a[1] ^ a[2] ^ a[3]
        mixed.extend(a[k] ^ t ^ xtime(a[k] ^ a[(k + 1) % 4]) for k in range(4))
    return mixed


def expand_key(key: bytes) -> list[bytes]:
    """The 11 round keys of AES-128."""
    if len(key) != 16:
        raise ValueError("AES-128 keys are 16 bytes long")
    words = [list(key[4 * i : 4 * i + 4]) for i in range(4)]
    for i in range(4, 44):
        word = list(words[i - 1])
        if i % 4 == 0:
            word = [sbox(b) for b in word[1:] + word[:1]]
            word[0] ^= RCON[i // 4 - 1]
        words.append([a ^ b for a, b in zip(words[i - 4], word)])
    return [bytes(sum(words[4 * r : 4 * r + 4], [])) for r in range(11)]


def aes128_encrypt(plaintext: bytes, key: bytes) -> bytes:
    if len(plaintext) != 16:
        raise ValueError("AES blocks are 16 bytes long")
    round_keys = expand_key(key)
    state = add_round_key(list(plaintext), round_keys[0])
    for r in range(1, 10):
        state = add_round_key(mix_columns(shift_rows(sub_bytes(state))), round_keys[r])
    state = add_round_key(shift_rows(sub_bytes(state)), round_keys[10])
    return bytes(state)


def round_one_state(plaintext: bytes, key: bytes) -> bytes:
    """State after the first round's SubBytes, ShiftRows and MixColumns (before the next key addition)."""
    return bytes(mix_columns(shift_rows(sub_bytes(add_round_key(list(plaintext), key)))))
