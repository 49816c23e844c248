"""
One-pixel attacks on standardized traces: a single sample is replaced by a new amplitude, the (position, amplitude) pair
being searched by differential evolution against a black-box predictor.
"""

from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Optional, Sequence

import numpy as np

from app.adversarial.evolution import differential_evolution
from app.adversarial.models import Balance, ConfidenceTarget, DeConfig, Perturbation, PerturbationSet
from app.classifiers.models import Predictor
from app.utils import derive_seed, progress

logger = logging.getLogger(__name__)

AMPLITUDE_BOUNDS = (-5.2, 4.8)


def allowed_positions(n: int, windows: Optional[Sequence[tuple[int, int]]] = None) -> np.ndarray:
    """Sorted sample indices a perturbation may hit: the union of inclusive `windows`, clipped to the trace, or all."""
    if not windows:
        return np.arange(n)
    positions = np.concatenate([np.arange(max(0, low), min(n - 1, high) + 1) for low, high in windows])
    positions = np.unique(positions)
    if not len(positions):
        raise ValueError("the position constraint leaves no sample of the trace")
    return positions


def apply(trace: np.ndarray, position: int, amplitude: float) -> np.ndarray:
    """Copy of `trace` whose sample at `position` is replaced by `amplitude`."""
    perturbed = np.array(trace, dtype=np.float64)
    perturbed[position] = amplitude
    return perturbed


def apply_set(traces: np.ndarray, perturbations: PerturbationSet) -> np.ndarray:
    """Apply every perturbation to the trace of its `trace_id` (row index of `traces`)."""
    perturbed = np.array(traces, dtype=np.float64)
    for p in perturbations:
        perturbed[p.trace_id, p.position] = p.amplitude
    return perturbed


def satisfied(confidences: np.ndarray, termination: ConfidenceTarget | Balance, target_class: Optional[int]) -> bool:
    if isinstance(termination, Balance):
        return bool(abs(confidences[0] - confidences[1]) <= termination.sigma)
    return bool(confidences[target_class] >= termination.tau)


def _target_class(model: Predictor, trace: np.ndarray, termination: ConfidenceTarget | Balance) -> Optional[int]:
    if isinstance(termination, Balance):
        if model.n_classes != 2:
            raise ValueError(f"Balance termination needs a two-class model, got {model.n_classes} classes")
        return None
    if termination.target_class is not None:
        if termination.target_class >= model.n_classes:
            raise ValueError(f"target class {termination.target_class} is not a class of the model")
        return termination.target_class
    clean = model.predict_proba(trace[None, :])[0]
    return int(np.argsort(clean, kind="stable")[-2])


def one_pixel_attack(
    model: Predictor,
    trace: np.ndarray,
    termination: ConfidenceTarget | Balance,
    de_config: DeConfig,
    constraint: Optional[Sequence[tuple[int, int]]] = None,
    amplitude_bounds: tuple[float, float] = AMPLITUDE_BOUNDS,
    trace_id: int = 0,
) -> Perturbation:
    """Search the best single-sample perturbation of a standardized trace.

    Candidates are (position gene, amplitude). The real-valued position gene indexes the allowed positions and is
    rounded at evaluation. The search bounds are built here and replace `de_config.bounds`.

    Args:
        model (Predictor): Attacked model.
        trace (np.ndarray): Standardized trace.
        termination (ConfidenceTarget | Balance): Success predicate, also the objective: the target-class confidence
            for ConfidenceTarget, -|d0 - d1| for Balance.
        de_config (DeConfig): DE parameters.
        constraint (Optional[Sequence[tuple[int, int]]], optional): Inclusive sample windows the position must fall
            in. Defaults to None (any sample).
        amplitude_bounds (tuple[float, float], optional): Amplitude range. Defaults to AMPLITUDE_BOUNDS.
        trace_id (int, optional): Identifier stored in the perturbation. Defaults to 0.

    Returns:
        Perturbation: Best perturbation and whether the predicate holds for it.
    """
    trace = np.asarray(trace, dtype=np.float64)
    allowed = allowed_positions(len(trace), constraint)
    target_class = _target_class(model, trace, termination)

    def positions_of(genes: np.ndarray) -> np.ndarray:
        return allowed[np.clip(np.rint(genes).astype(np.int64), 0, len(allowed) - 1)]

    def predict(candidates: np.ndarray) -> np.ndarray:
        candidates = np.atleast_2d(candidates)
        perturbed = np.repeat(trace[None, :], len(candidates), axis=0)
        perturbed[np.arange(len(candidates)), positions_of(candidates[:, 0])] = candidates[:, 1]
        return model.predict_proba(perturbed)

    def fitness(population: np.ndarray) -> np.ndarray:
        confidences = predict(population)
        if target_class is None:
            return -np.abs(confidences[:, 0] - confidences[:, 1])
        return confidences[:, target_class]

    def stop(candidate: np.ndarray) -> bool:
        return satisfied(predict(candidate)[0], termination, target_class)

    config = de_config.with_bounds([(0.0, float(len(allowed) - 1)), amplitude_bounds])
    result = differential_evolution(fitness, config, stop=stop, vectorized=True)

    confidences = predict(result.best)[0]
    return Perturbation(
        trace_id=trace_id,
        position=int(positions_of(result.best[:1])[0]),
        amplitude=float(result.best[1]),
        success=satisfied(confidences, termination, target_class),
        target_class=target_class,
        achieved_confidence=float(confidences[0 if target_class is None else target_class]),
        confidences=confidences,
        iterations=result.iterations,
    )


def mine_perturbations(
    model: Predictor,
    traces: np.ndarray,
    termination: ConfidenceTarget | Balance,
    de_config: DeConfig,
    constraint: Optional[Sequence[tuple[int, int]]] = None,
    amplitude_bounds: tuple[float, float] = AMPLITUDE_BOUNDS,
    threads: int = 1,
) -> PerturbationSet:
    """Run one one-pixel attack per standardized trace and keep every result, successful or not.

    The attack on trace i is seeded with `derive_seed(de_config.seed, "one-pixel", i)`, whatever the scheduling.
    """
    traces = np.atleast_2d(np.asarray(traces, dtype=np.float64)) if len(traces) else np.empty((0, 0))

    def attack(i: int) -> Perturbation:
        config = de_config.model_copy(update={"seed": derive_seed(de_config.seed, "one-pixel", i)})
        return one_pixel_attack(model, traces[i], termination, config, constraint, amplitude_bounds, trace_id=i)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        perturbations = list(progress(pool.map(attack, range(len(traces))), total=len(traces), desc="one-pixel"))

    mined = PerturbationSet(perturbations, termination)
    if len(mined):
        logger.info(
            f"Mined {len(mined)} perturbations ({termination.kind}): success rate {mined.success_rate:.3f}, "
            f"{mined.mean_iterations:.1f} DE iterations on average"
        )
    return mined


def transfer_rate(
    model: Predictor, traces: np.ndarray, perturbations: PerturbationSet, termination: ConfidenceTarget | Balance
) -> float:
    """Fraction of perturbations (mined on another model) whose predicate holds on `model`.

    A ConfidenceTarget without explicit class keeps the target class recorded at mining time.
    """
    if not len(perturbations):
        return 0.0
    perturbed = np.asarray(traces, dtype=np.float64)[[p.trace_id for p in perturbations]]
    perturbed[np.arange(len(perturbed)), perturbations.positions] = perturbations.amplitudes
    confidences = model.predict_proba(perturbed)
    hits = [
        satisfied(c, termination, p.target_class if isinstance(termination, ConfidenceTarget) else None)
        for c, p in zip(confidences, perturbations)
    ]
    return float(np.mean(hits))
