import numpy as np
import pytest

from app.aes.codegen import first_round_program
from app.aes.leakage import labels_of
from app.aes.models import LeakageModel
from app.dataset.acquisition import acquire
from app.dataset.models import Campaign, Dataset, StandardizationStats
from app.dataset.processing import apply_stats, correlation_profile, split, standardize, subsample
from app.errors import DatasetError
from app.store.traces import HEADER, write_dataset
from app.vm.assembler import assemble
from app.vm.models import DeviceConfig


def two_trace_dataset(traces) -> Dataset:
    count = len(traces)
    zeros = np.zeros((count, 16), dtype=np.uint8)
    return Dataset(
        traces=np.asarray(traces, dtype=np.float32),
        plaintexts=zeros,
        keys=zeros,
        labels=np.zeros(count, dtype=np.uint8),
        leakage_model=LeakageModel(),
        key_policy="fixed",
    )


def test_standardize_two_values():
    standardized, stats = standardize(two_trace_dataset([[0.0, 5.0], [2.0, 5.0]]))
    np.testing.assert_allclose(standardized.traces, [[-1.0, 0.0], [1.0, 0.0]])
    assert standardized.standardized
    np.testing.assert_allclose(stats.mean, [1.0, 5.0])
    assert stats.sd[1] == pytest.approx(1e-6)


def test_standardize_needs_two_traces():
    with pytest.raises(DatasetError):
        standardize(two_trace_dataset([[1.0]]))


def test_apply_stats_checks_the_length(make_dataset):
    with pytest.raises(DatasetError):
        apply_stats(make_dataset(4, n=8), StandardizationStats(np.zeros(5), np.ones(5)))


def test_raw_at_inverts_standardize_at():
    stats = StandardizationStats(mean=np.array([1.0, 2.0, 3.0]), sd=np.array([2.0, 0.5, 1.0]))
    positions = np.array([0, 2])
    values = np.array([4.0, -1.0])
    np.testing.assert_allclose(stats.raw_at(stats.standardize_at(values, positions), positions), values)


def test_split_is_a_seeded_partition(make_dataset):
    dataset = make_dataset(50)
    dataset.plaintexts[:, 0] = np.arange(50)
    profiling, attack = split(dataset, 30, seed=1)
    assert (len(profiling), len(attack)) == (30, 20)
    ids = np.concatenate([profiling.plaintexts[:, 0], attack.plaintexts[:, 0]])
    assert sorted(ids.tolist()) == list(range(50))
    again, _ = split(dataset, 30, seed=1)
    np.testing.assert_array_equal(again.traces, profiling.traces)


@pytest.mark.parametrize("count", [0, 50])
def test_split_rejects_empty_parts(make_dataset, count):
    with pytest.raises(DatasetError):
        split(make_dataset(50), count, seed=0)


def test_subsample(make_dataset):
    dataset = make_dataset(20)
    assert len(subsample(dataset, 5, seed=0)) == 5
    assert subsample(dataset, 50, seed=0) is dataset


def test_correlation_peaks_on_the_leaking_sample(make_hw_dataset):
    correlation = correlation_profile(make_hw_dataset(200, n=6, position=2))
    assert correlation[2] == pytest.approx(1.0)
    np.testing.assert_array_equal(np.delete(correlation, 2), 0.0)


def test_correlation_needs_a_fixed_key(make_dataset):
    with pytest.raises(DatasetError):
        correlation_profile(make_dataset(20))


def test_relabel(make_dataset):
    dataset = make_dataset(30)
    hw = dataset.relabel(LeakageModel(kind="HW"))
    np.testing.assert_array_equal(hw.labels, labels_of(dataset.plaintexts, dataset.keys, LeakageModel(kind="HW")))
    assert hw.n_classes == 9


def test_fixed_key_campaign_needs_a_key():
    with pytest.raises(ValueError):
        Campaign(count=1, key_policy="fixed").key_bytes()
    with pytest.raises(ValueError):
        Campaign(count=1, key_policy="fixed", fixed_key="00ff")


def test_acquisition(tmp_path):
    program = assemble(first_round_program())
    key = "2b7e151628aed2a6abf7158809cf4f3c"
    campaign = Campaign(count=6, key_policy="fixed", fixed_key=key, config=DeviceConfig(), seed=3)
    dataset = acquire(program, campaign, LeakageModel(), threads=1)
    assert dataset.traces.shape == (6, 840)
    assert dataset.traces.dtype == np.float32
    assert dataset.fixed_key == bytes.fromhex(key)
    np.testing.assert_array_equal(dataset.lengths, 771)
    path = write_dataset(tmp_path / "attack.sct", dataset)
    assert HEADER.unpack_from(path.read_bytes())[2] == 840
    np.testing.assert_array_equal(dataset.labels, labels_of(dataset.plaintexts, dataset.keys, LeakageModel()))

    threaded = acquire(program, campaign, LeakageModel(), threads=3)
    np.testing.assert_array_equal(threaded.traces, dataset.traces)
    np.testing.assert_array_equal(threaded.plaintexts, dataset.plaintexts)


def test_random_key_acquisition_draws_keys():
    campaign = Campaign(count=4, key_policy="random", seed=0)
    dataset = acquire(assemble(first_round_program()), campaign, LeakageModel())
    assert dataset.fixed_key is None
    assert len({bytes(k) for k in dataset.keys}) == 4


def test_acquisition_respects_the_length_cap():
    campaign = Campaign(count=1, length_cap=700)
    with pytest.raises(DatasetError):
        acquire(assemble(first_round_program()), campaign, LeakageModel())
