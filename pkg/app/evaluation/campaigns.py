"""
Repeated attack campaigns: mean rank curves over resampled profiling/attack pairs, and the study of attackers retrained
on one-pixel conversions of the traces.
"""

from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Callable, Optional

import numpy as np

from app.adversarial.models import Balance, ConfidenceTarget, DeConfig
from app.adversarial.one_pixel import AMPLITUDE_BOUNDS, apply_set, mine_perturbations
from app.classifiers.models import Predictor
from app.dataset.models import Dataset
from app.dataset.processing import apply_stats, split, standardize, subsample
from app.errors import DatasetError
from app.evaluation.metrics import accuracy_of, equivalence_trajectory, rank_trajectory
from app.evaluation.models import NaiveStudyReport, RankCurve
from app.utils import derive_seed

logger = logging.getLogger(__name__)

# Fits an attacker on a standardized profiling dataset, given a training seed
Trainer = Callable[[Dataset, int], Predictor]


def true_key_byte(dataset: Dataset) -> int:
    key = dataset.fixed_key
    if key is None:
        raise DatasetError("rank evaluation needs a fixed-key attack dataset")
    return key[dataset.leakage_model.byte_index]


def _repetition(
    trainer: Trainer,
    dataset: Dataset,
    profiling_count: int,
    M_max: int,
    seed: int,
    attack_dataset: Optional[Dataset],
) -> tuple[np.ndarray, np.ndarray, float]:
    if attack_dataset is None:
        profiling, attack = split(dataset, profiling_count, derive_seed(seed, "split"))
    else:
        profiling, attack = subsample(dataset, profiling_count, derive_seed(seed, "split")), attack_dataset
    true_key = true_key_byte(attack)
    profiling, stats = standardize(profiling)
    attack = apply_stats(attack, stats)

    model = trainer(profiling, derive_seed(seed, "train"))
    order = np.random.default_rng(derive_seed(seed, "shuffle")).permutation(len(attack))[:M_max]
    predictions = model.predict_proba(attack.traces[order])
    plaintexts = attack.plaintexts[order]
    ranks = rank_trajectory(predictions, plaintexts, attack.leakage_model, true_key, M_max)
    equivalence = equivalence_trajectory(predictions, plaintexts, attack.leakage_model, true_key, M_max)
    return ranks, equivalence, accuracy_of(model, attack)


def mean_rank_curve(
    trainer: Trainer,
    dataset: Dataset,
    repetitions: int,
    profiling_count: int,
    M_max: int,
    seed: int = 0,
    attack_dataset: Optional[Dataset] = None,
    threads: int = 1,
) -> RankCurve:
    """Mean rank of the true key byte as a function of the number of attack traces.

    Every repetition splits the dataset afresh (or, with `attack_dataset`, subsamples the profiling traces from
    `dataset` and attacks `attack_dataset`), standardizes with the profiling statistics, trains a new attacker, and
    ranks the key over a seeded shuffle of the attack traces.

    Args:
        trainer (Trainer): Attacker factory.
        dataset (Dataset): Raw dataset, fixed key unless `attack_dataset` is given.
        repetitions (int): Number of profiling/attack pairs.
        profiling_count (int): Profiling traces per repetition.
        M_max (int): Largest number of attack traces. Capped by the attack set size.
        seed (int, optional): Seed of the repetitions; repetition r uses `derive_seed(seed, "repetition", r)`.
            Defaults to 0.
        attack_dataset (Optional[Dataset], optional): Separate fixed-key attack set. Defaults to None.
        threads (int, optional): Concurrent repetitions. Defaults to 1.

    Raises:
        DatasetError: Attack traces without a fixed key, or impossible split.
        TrainingError: Propagated from the trainer.

    Returns:
        RankCurve: Ranks per repetition and M, with accuracies and equivalence-class ranks.
    """
    if repetitions < 1:
        raise ValueError("at least one repetition is required")
    attack_size = len(attack_dataset) if attack_dataset is not None else len(dataset) - profiling_count
    if M_max > attack_size:
        logger.warning(f"Only {attack_size} attack traces available, M_max lowered from {M_max}")
        M_max = attack_size
    if M_max < 1:
        raise DatasetError("no attack trace left after the profiling split")

    def run(r: int):
        return _repetition(
            trainer, dataset, profiling_count, M_max, derive_seed(seed, "repetition", r), attack_dataset
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, range(repetitions)))

    curve = RankCurve(
        per_repetition=np.stack([r[0] for r in results]),
        accuracies=[r[2] for r in results],
        equivalence=np.stack([r[1] for r in results]),
    )
    logger.info(
        f"Mean rank over {repetitions} repetitions: {curve.mean[-1]:.2f} at M={M_max}, "
        f"rank 0 from M={curve.traces_to_rank_zero()}, accuracy {curve.mean_accuracy:.4f}"
    )
    return curve


def naive_adversarial_study(
    dataset: Dataset,
    trainer: Trainer,
    termination: ConfidenceTarget | Balance,
    de_config: DeConfig,
    repetitions: int,
    profiling_count: int,
    M_max: int,
    seed: int = 0,
    source_model: Optional[Predictor] = None,
    amplitude_bounds: tuple[float, float] = AMPLITUDE_BOUNDS,
    threads: int = 1,
) -> NaiveStudyReport:
    """Turn every trace into its one-pixel adversarial version and attack again with attackers retrained on them.

    The conversion attacks a source model (trained here on a seeded profiling split when not given) over the
    standardized traces; the rank curves of the original and converted datasets are computed with the same seeds.

    Args:
        dataset (Dataset): Raw fixed-key dataset.
        trainer (Trainer): Attacker factory.
        termination (ConfidenceTarget | Balance): Predicate of the conversions.
        de_config (DeConfig): DE parameters of the conversions.
        repetitions (int): Repetitions of each rank curve.
        profiling_count (int): Profiling traces per repetition.
        M_max (int): Largest number of attack traces.
        seed (int, optional): Seed of the study. Defaults to 0.
        source_model (Optional[Predictor], optional): Model the conversions fool. Defaults to None.
        amplitude_bounds (tuple[float, float], optional): Amplitude range of the conversions.
        threads (int, optional): Concurrency of the conversions and repetitions. Defaults to 1.

    Returns:
        NaiveStudyReport: Both rank curves and the conversion success rate.
    """
    standardized, stats = standardize(dataset)
    if source_model is None:
        profiling, _ = split(standardized, profiling_count, derive_seed(seed, "source-split"))
        source_model = trainer(profiling, derive_seed(seed, "source-train"))

    de_config = de_config.model_copy(update={"seed": derive_seed(seed, "conversion")})
    conversions = mine_perturbations(
        source_model, standardized.traces, termination, de_config, amplitude_bounds=amplitude_bounds, threads=threads
    )
    # Back to raw units so both curves go through the same standardization
    converted = dataset.with_traces(stats.raw_at(apply_set(standardized.traces, conversions), np.arange(stats.n)))

    source = mean_rank_curve(trainer, dataset, repetitions, profiling_count, M_max, seed, threads=threads)
    adversarial = mean_rank_curve(trainer, converted, repetitions, profiling_count, M_max, seed, threads=threads)
    report = NaiveStudyReport(source=source, adversarial=adversarial, conversion_success_rate=conversions.success_rate)
    logger.info(f"Naive conversion study: {report.summary}")
    return report


def model_rank_curve(
    model: Predictor, attack_dataset: Dataset, repetitions: int, M_max: int, seed: int = 0
) -> RankCurve:
    """Rank curve of an already trained attacker, over `repetitions` seeded orderings of the attack traces.

    The attack set is raw; it is standardized with the statistics stored in the model.
    """
    stats = getattr(model, "stats", None)
    if stats is None:
        raise DatasetError("the model carries no standardization statistics")
    attack = apply_stats(attack_dataset, stats)
    true_key = true_key_byte(attack)
    M_max = min(M_max, len(attack))
    predictions = model.predict_proba(attack.traces)
    accuracy = float((predictions.argmax(axis=1) == attack.labels).mean())

    ranks, equivalence = [], []
    for r in range(repetitions):
        order = np.random.default_rng(derive_seed(seed, "shuffle", r)).permutation(len(attack))[:M_max]
        args = (predictions[order], attack.plaintexts[order], attack.leakage_model, true_key, M_max)
        ranks.append(rank_trajectory(*args))
        equivalence.append(equivalence_trajectory(*args))
    return RankCurve(
        per_repetition=np.stack(ranks), accuracies=[accuracy] * repetitions, equivalence=np.stack(equivalence)
    )
