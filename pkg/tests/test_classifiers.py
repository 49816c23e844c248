import numpy as np
import pytest

from app.aes.models import LeakageModel
from app.classifiers.models import CnnSpec, MlpSpec
from app.classifiers.trainer import gradient_check, initialize, predict, shift_agreement, train
from app.dataset.processing import apply_stats, standardize
from app.errors import TrainingError
from app.evaluation.metrics import accuracy_of


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    spec = MlpSpec(hidden_widths=[5, 4], activation="tanh", n_classes=3, seed=1)
    X = rng.normal(size=(6, 4))
    y = np.array([0, 1, 2, 0, 1, 2])
    assert gradient_check(spec, X, y) < 1e-4


def test_cnn_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    spec = CnnSpec.uniform([2, 3], 3, 2, dense_widths=[4], activation="tanh", n_classes=2, seed=2)
    X = rng.normal(size=(4, 16))
    y = np.array([0, 1, 1, 0])
    assert gradient_check(spec, X, y) < 1e-4


def test_gradient_check_on_a_zero_input_batch():
    spec = MlpSpec(hidden_widths=[5, 4], activation="tanh", n_classes=3, seed=1)
    error = gradient_check(spec, np.zeros((4, 6)), np.array([0, 1, 2, 0]))
    assert np.isfinite(error)
    assert error < 1e-4


def test_predictions_are_distributions():
    model = initialize(MlpSpec(hidden_widths=[6], n_classes=9, seed=3), 8)
    proba = model.predict_proba(np.random.default_rng(0).normal(size=(5, 8)))
    assert proba.shape == (5, 9)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert predict(model, np.zeros(8)).shape == (9,)


@pytest.mark.parametrize(
    "spec", [MlpSpec(hidden_widths=[6], seed=3), CnnSpec.uniform([2], 3, 2, dense_widths=[4], seed=3)]
)
def test_inference_writes_no_layer_state(spec):
    model = initialize(spec, 16)
    rng = np.random.default_rng(0)
    model.network.forward(rng.normal(size=(4, 16)))
    before = [dict(vars(layer)) for layer in model.network.layers]
    model.predict_proba(rng.normal(size=(7, 16)))
    after = [dict(vars(layer)) for layer in model.network.layers]
    for old, new in zip(before, after):
        assert old.keys() == new.keys()
        assert all(old[name] is new[name] for name in old)


def test_predict_checks_the_trace_length():
    model = initialize(MlpSpec(hidden_widths=[6]), 8)
    with pytest.raises(TrainingError):
        predict(model, np.zeros(7))


def test_cnn_must_fit_the_trace_length():
    with pytest.raises(TrainingError):
        initialize(CnnSpec.uniform([2], 11, 2), 8)


def test_training_needs_standardized_traces(make_dataset):
    with pytest.raises(TrainingError, match="standardized"):
        train(make_dataset(20), MlpSpec(hidden_widths=[4], epochs=1))


def test_labels_must_fit_the_output(make_dataset):
    standardized, _ = standardize(make_dataset(20, leakage=LeakageModel(kind="HW")))
    with pytest.raises(TrainingError):
        train(standardized, MlpSpec(hidden_widths=[4], epochs=1, n_classes=2))


def test_mlp_learns_a_leaking_sample(make_dataset):
    profiling, stats = standardize(make_dataset(400, n=8, signal=4.0, seed=0))
    attack = apply_stats(make_dataset(200, n=8, signal=4.0, seed=1), stats)
    spec = MlpSpec(hidden_widths=[16], learning_rate=1e-2, batch_size=32, epochs=30, seed=0)
    model = train(profiling, spec)
    assert len(model.training_log) == 30
    assert model.training_log[-1] < model.training_log[0]
    assert accuracy_of(model, attack) > 0.85
    assert model.stats is stats


def test_training_is_seeded(make_dataset):
    profiling, _ = standardize(make_dataset(64, n=16))
    spec = CnnSpec.uniform([2], 3, 2, dense_widths=[4], epochs=2, batch_size=16, seed=5)
    first, second = train(profiling, spec), train(profiling, spec)
    for a, b in zip(first.network.get_weights(), second.network.get_weights()):
        np.testing.assert_array_equal(a, b)


def test_shift_agreement(make_dataset):
    profiling, _ = standardize(make_dataset(20, n=16))
    model = initialize(CnnSpec.uniform([2], 3, 2, dense_widths=[4]), 16)
    assert shift_agreement(model, profiling.traces, 0) == 1.0
    assert 0.0 <= shift_agreement(model, profiling.traces, 3) <= 1.0
