import math

import numpy as np
import pytest

from app.aes.codegen import CodegenOptions, first_round_program, memory_image, round_output, sbox_write_indices
from app.aes.leakage import hypothesis_labels, label_of, labels_of
from app.aes.models import LeakageModel
from app.aes.reference import SBOX, aes128_encrypt, expand_key, round_one_state, sbox, xtime
from app.vm.executor import execute

KEY = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
PLAINTEXT = bytes.fromhex("00112233445566778899aabbccddeeff")


def test_encryption_matches_the_standard_vector():
    assert aes128_encrypt(PLAINTEXT, KEY).hex() == "69c4e0d86a7b0430d8cdb78070b4c55a"


def test_sbox_and_xtime():
    assert sbox(0x00) == 0x63
    assert sbox(0x53) == 0xED
    assert len(set(SBOX.tolist())) == 256
    assert xtime(0x57) == 0xAE
    assert xtime(0xAE) == 0x47


def test_last_round_key():
    assert expand_key(bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c"))[10].hex() == "d014f9a8c9ee2589e13f0cc8b6630ca6"


def test_vm_round_matches_reference(aes_program, quiet_device):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        plaintext, key = rng.bytes(16), rng.bytes(16)
        _, state = execute(aes_program, memory_image(plaintext, key), quiet_device)
        assert round_output(state) == round_one_state(plaintext, key), (plaintext.hex(), key.hex())


def test_vm_round_of_zero_inputs(aes_program, quiet_device):
    _, state = execute(aes_program, memory_image(bytes(16), bytes(16)), quiet_device)
    assert round_output(state) == round_one_state(bytes(16), bytes(16))


def test_scratch_register_is_left_free(aes_program):
    assert all(24 not in (x.dst, x.src if x.src_kind == "reg" else None, x.index) for x in aes_program.instructions)
    with pytest.raises(ValueError):
        first_round_program(CodegenOptions(scratch_register=4))


@pytest.mark.parametrize("byte_index", [0, 2, 7, 15])
def test_sbox_write_indices(aes_program, quiet_device, byte_index):
    rng = np.random.default_rng(byte_index)
    plaintext, key = rng.bytes(16), rng.bytes(16)
    _, state = execute(aes_program, memory_image(plaintext, key), quiet_device)
    expected = sbox(plaintext[byte_index] ^ key[byte_index])
    indices = sbox_write_indices(byte_index)
    assert aes_program.instructions[indices[0]].opcode == "ld"
    assert all(state.events[i].value == expected for i in indices)


def test_labels_of_zero_bytes():
    zero = bytes(16)
    assert label_of(zero, zero, LeakageModel(kind="LSB")) == 1
    assert label_of(zero, zero, LeakageModel(kind="HW")) == 4
    assert LeakageModel(kind="HW").n_classes == 9


def test_hypothesis_labels_contain_the_true_labels():
    rng = np.random.default_rng(0)
    plaintexts = rng.integers(0, 256, (20, 16), dtype=np.uint8)
    keys = np.tile(np.arange(16, dtype=np.uint8), (20, 1))
    model = LeakageModel(kind="HW", byte_index=5)
    hypotheses = hypothesis_labels(plaintexts, model)
    assert hypotheses.shape == (20, 256)
    np.testing.assert_array_equal(hypotheses[:, 5], labels_of(plaintexts, keys, model))


def test_hamming_weight_labels_follow_the_binomial_profile():
    model = LeakageModel(kind="HW", byte_index=3)
    binomial = np.array([math.comb(8, k) for k in range(9)])

    every_byte = np.zeros((256, 16), dtype=np.uint8)
    every_byte[:, 3] = np.arange(256)
    exhaustive = np.bincount(labels_of(every_byte, np.zeros_like(every_byte), model), minlength=9)
    np.testing.assert_array_equal(exhaustive, binomial)

    rng = np.random.default_rng(0)
    count = 25_600
    plaintexts = rng.integers(0, 256, (count, 16), dtype=np.uint8)
    keys = np.tile(np.frombuffer(bytes(range(16)), dtype=np.uint8), (count, 1))
    labels = labels_of(plaintexts, keys, model)
    assert labels.min() >= 0 and labels.max() <= 8
    p = binomial / 256
    sigma = np.sqrt(count * p * (1 - p))
    assert (np.abs(np.bincount(labels, minlength=9) - count * p) <= 4 * sigma).all()
