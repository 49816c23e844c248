import numpy as np
import pytest
from scipy.special import softmax

from app.adversarial.evolution import differential_evolution
from app.adversarial.histograms import amplitude_histogram, peak_agreement, position_histogram, top_peaks
from app.adversarial.models import Balance, ConfidenceTarget, DeConfig, Perturbation, PerturbationSet
from app.adversarial.one_pixel import allowed_positions, apply_set, mine_perturbations, one_pixel_attack, transfer_rate


class LinearProbe:
    """Two-class model whose class-1 logit is `weight` times sample `position`."""

    n_classes = 2

    def __init__(self, position: int = 3, weight: float = 4.0):
        self.position = position
        self.weight = weight

    def predict_proba(self, traces):
        traces = np.atleast_2d(traces)
        logits = np.stack([np.zeros(len(traces)), self.weight * traces[:, self.position]], axis=1)
        return softmax(logits, axis=1)


DE = DeConfig(population_size=40, max_iterations=100, seed=11)


def test_de_finds_the_optimum_of_a_quadratic():
    config = DeConfig(population_size=30, max_iterations=200, bounds=[(-5, 5), (-5, 5)], seed=0)
    result = differential_evolution(lambda x: -((x[0] - 1) ** 2) - (x[1] + 2) ** 2, config)
    np.testing.assert_allclose(result.best, [1.0, -2.0], atol=1e-3)
    assert result.iterations == 200
    assert not result.stopped
    assert all(a <= b for a, b in zip(result.history, result.history[1:]))


def test_de_stops_early():
    config = DeConfig(population_size=20, max_iterations=500, bounds=[(-5, 5)], seed=1)
    result = differential_evolution(lambda x: -x[0] ** 2, config, stop=lambda best: best[0] ** 2 < 0.01)
    assert result.stopped
    assert result.iterations < 500
    assert result.best[0] ** 2 < 0.01


def test_de_is_seeded_and_vectorizable():
    config = DeConfig(population_size=10, max_iterations=20, bounds=[(0, 1)] * 3, seed=4)
    scalar = differential_evolution(lambda x: float(x[0] - x[1]), config)
    batch = differential_evolution(lambda p: p[:, 0] - p[:, 1], config, vectorized=True)
    np.testing.assert_array_equal(scalar.best, batch.best)
    np.testing.assert_array_equal(scalar.history, batch.history)


def test_de_keeps_an_identical_population_in_place():
    config = DeConfig(population_size=12, max_iterations=15, bounds=[(-5, 5), (-5, 5)], seed=2)
    start = np.array([0.75, -1.5])
    evaluated = []

    def fitness(candidate):
        evaluated.append(candidate.copy())
        return -float(candidate @ candidate)

    result = differential_evolution(fitness, config, initial=np.tile(start, (12, 1)))
    np.testing.assert_array_equal(result.best, start)
    assert result.iterations == 15
    assert result.history == [result.history[0]] * 16
    np.testing.assert_array_equal(np.array(evaluated), np.tile(start, (12 * 16, 1)))


def test_de_checks_the_initial_population():
    config = DeConfig(population_size=12, max_iterations=1, bounds=[(-5, 5)], seed=2)
    with pytest.raises(ValueError):
        differential_evolution(lambda x: 0.0, config, initial=np.zeros((3, 1)))


def test_de_needs_bounds():
    with pytest.raises(ValueError):
        differential_evolution(lambda x: 0.0, DeConfig())
    with pytest.raises(ValueError):
        DeConfig(bounds=[(1.0, 0.0)])


def test_one_pixel_attack_hits_the_leaking_sample():
    perturbation = one_pixel_attack(LinearProbe(), np.zeros(8), ConfidenceTarget(target_class=1, tau=0.95), DE)
    assert perturbation.success
    assert perturbation.position == 3
    assert perturbation.amplitude > np.log(19) / 4
    assert perturbation.achieved_confidence >= 0.95
    assert perturbation.confidences.sum() == pytest.approx(1.0)


def test_runner_up_class_is_targeted_by_default():
    trace = np.zeros(8)
    trace[3] = 1.0
    perturbation = one_pixel_attack(LinearProbe(), trace, ConfidenceTarget(), DE)
    assert perturbation.target_class == 0
    assert perturbation.success
    assert perturbation.amplitude < 0


def test_balance_termination():
    trace = np.zeros(8)
    trace[3] = 1.0
    perturbation = one_pixel_attack(LinearProbe(), trace, Balance(sigma=0.05), DE)
    assert perturbation.success
    assert perturbation.target_class is None
    assert abs(perturbation.confidences[0] - perturbation.confidences[1]) <= 0.05


def test_position_constraint():
    perturbation = one_pixel_attack(
        LinearProbe(), np.zeros(8), ConfidenceTarget(target_class=1), DE, constraint=[(5, 6)]
    )
    assert perturbation.position in (5, 6)
    assert not perturbation.success
    assert perturbation.achieved_confidence == pytest.approx(0.5)


def test_amplitude_bounds_are_respected():
    perturbation = one_pixel_attack(
        LinearProbe(), np.zeros(8), ConfidenceTarget(target_class=1), DE, amplitude_bounds=(-1.0, 0.5)
    )
    assert -1.0 <= perturbation.amplitude <= 0.5
    assert not perturbation.success


def test_allowed_positions():
    np.testing.assert_array_equal(allowed_positions(8, [(-2, 1), (6, 20)]), [0, 1, 6, 7])
    np.testing.assert_array_equal(allowed_positions(4), [0, 1, 2, 3])
    with pytest.raises(ValueError):
        allowed_positions(4, [(10, 12)])


def test_mining_is_independent_of_threads():
    traces = np.random.default_rng(0).normal(size=(6, 8)) * 0.1
    small = DeConfig(population_size=20, max_iterations=20, seed=3)
    termination = ConfidenceTarget(target_class=1)
    serial = mine_perturbations(LinearProbe(), traces, termination, small, threads=1)
    threaded = mine_perturbations(LinearProbe(), traces, termination, small, threads=3)
    assert [(p.position, p.amplitude) for p in serial] == [(p.position, p.amplitude) for p in threaded]
    assert [p.trace_id for p in serial] == list(range(6))
    assert transfer_rate(LinearProbe(), traces, serial.successful, termination) == 1.0


def test_apply_set():
    perturbations = PerturbationSet([Perturbation(1, 2, 9.0, True, 1, 0.99)])
    perturbed = apply_set(np.zeros((2, 4)), perturbations)
    assert perturbed[1, 2] == 9.0
    assert perturbed.sum() == 9.0


def test_amplitude_histogram_edges():
    histogram = amplitude_histogram(np.array([-5.2, 4.8]), bins=160, range=(-5.2, 4.8))
    assert len(histogram.counts) == 160
    assert histogram.counts[0] == 1
    assert histogram.counts[-1] == 1
    assert histogram.counts.sum() == 2
    clamped = amplitude_histogram(np.array([-9.0, 9.0]), bins=10, range=(-5.2, 4.8))
    assert (clamped.counts[0], clamped.counts[-1]) == (1, 1)


def test_position_histogram():
    counts = position_histogram(np.array([5, 5, 5, 2]), 10)
    assert len(counts) == 10
    assert counts[5] == 3
    assert counts[2] == 1
    with pytest.raises(ValueError):
        position_histogram(np.array([10]), 10)


def test_top_peaks():
    np.testing.assert_array_equal(top_peaks(np.array([0, 3, 1, 5, 0, 2]), 2), [3, 1])
    np.testing.assert_array_equal(top_peaks(np.array([5, 1, 0, 4]), 2), [0, 3])
    np.testing.assert_array_equal(top_peaks(np.array([0, 4, 0, 3, 0, 0, 1]), 2, distance=3), [1, 6])


def test_peak_agreement():
    assert peak_agreement(np.array([10, 20, 30]), np.array([11]), 2) == pytest.approx(1 / 3)
    assert peak_agreement(np.array([]), np.array([1]), 2) == 0.0
