"""
Differential evolution, DE/rand/1/bin, maximizing a fitness over a box.

Each iteration builds, for every individual i, the mutant a + F(b - c) from three distinct individuals other than i,
clamps it to the bounds, crosses it with i (binomial crossover, one forced dimension) and keeps the trial when its
fitness is at least that of i.
"""

from dataclasses import dataclass, field
import logging
from typing import Callable, Optional

import numpy as np

from app.adversarial.models import DeConfig

logger = logging.getLogger(__name__)

Fitness = Callable[[np.ndarray], float | np.ndarray]
Stop = Callable[[np.ndarray], bool]


@dataclass
class DeResult:
    best: np.ndarray
    best_fitness: float
    history: list[float] = field(default_factory=list)  # best fitness after initialization and every iteration
    iterations: int = 0
    stopped: bool = False  # whether the stop predicate held before exhaustion


def _distinct_others(rng: np.random.Generator, size: int) -> np.ndarray:
    """(size, 3) indices, row i holding three distinct indices different from i."""
    order = np.argsort(rng.random((size, size - 1)), axis=1)[:, :3]
    return order + (order >= np.arange(size)[:, None])


def differential_evolution(
    fitness: Fitness,
    config: DeConfig,
    stop: Optional[Stop] = None,
    vectorized: bool = False,
    initial: Optional[np.ndarray] = None,
) -> DeResult:
    """Maximize `fitness` over `config.bounds`.

    Args:
        fitness (Fitness): Candidate to real. With `vectorized`, maps a (P, D) population to P values at once.
        config (DeConfig): Population size, iterations, F, CR, bounds and seed.
        stop (Optional[Stop], optional): Predicate on the best candidate, checked after initialization and after every
            iteration. Defaults to None.
        vectorized (bool, optional): Whether `fitness` evaluates a whole population. Defaults to False.
        initial (Optional[np.ndarray], optional): Initial (P, D) population. Defaults to uniform draws in the bounds.

    Returns:
        DeResult: Best-so-far candidate and fitness history.
    """
    if not config.bounds:
        raise ValueError("differential evolution needs at least one bounded dimension")
    bounds = np.asarray(config.bounds, dtype=np.float64)
    low, high = bounds[:, 0], bounds[:, 1]
    size, dims = config.population_size, len(bounds)
    rng = np.random.default_rng(config.seed)

    def evaluate(population: np.ndarray) -> np.ndarray:
        if vectorized:
            return np.asarray(fitness(population), dtype=np.float64)
        return np.array([fitness(candidate) for candidate in population], dtype=np.float64)

    if initial is not None:
        population = np.clip(np.array(initial, dtype=np.float64), low, high)
        if population.shape != (size, dims):
            raise ValueError(f"initial population must have shape {(size, dims)}")
    else:
        population = low + rng.random((size, dims)) * (high - low)
    scores = evaluate(population)
    best = int(np.argmax(scores))
    history = [float(scores[best])]
    stopped = bool(stop is not None and stop(population[best]))

    iterations = 0
    while not stopped and iterations < config.max_iterations:
        a, b, c = _distinct_others(rng, size).T
        mutants = np.clip(population[a] + config.differential_weight * (population[b] - population[c]), low, high)
        crossed = rng.random((size, dims)) < config.crossover_rate
        crossed[np.arange(size), rng.integers(0, dims, size)] = True
        trials = np.where(crossed, mutants, population)

        trial_scores = evaluate(trials)
        improved = trial_scores >= scores
        population[improved] = trials[improved]
        scores[improved] = trial_scores[improved]

        iterations += 1
        best = int(np.argmax(scores))
        history.append(float(scores[best]))
        stopped = bool(stop is not None and stop(population[best]))

    logger.debug(f"DE finished after {iterations} iterations, best fitness {history[-1]:.6g}")
    return DeResult(
        best=population[best].copy(),
        best_fitness=float(scores[best]),
        history=history,
        iterations=iterations,
        stopped=stopped,
    )
