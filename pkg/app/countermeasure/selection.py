"""
Choice of the amplitudes the noise instructions must produce, and of the instructions producing them.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from app.adversarial.histograms import AmplitudeHistogram
from app.countermeasure.models import InsertionPoint, NoiseSet
from app.dataset.models import StandardizationStats
from app.errors import CountermeasureError
from app.typings import AmplitudeCriterion
from app.vm.assembler import parse_instruction
from app.vm.executor import MemoryInit
from app.vm.models import DeviceConfig, Instruction, Program
from app.vm.profile import measure_instruction_profile

logger = logging.getLogger(__name__)

Interval = tuple[float, float]

# Inserted noise instructions of the reference protection: HW(0xff) = 8 written to the scratch register
LISTING_NOISE = ("mov r24, 0xff", "ori r24, 0xff", "ldi r24, 0xff", "in r24, 0x3d")

# Common instructions offered to the selection, all writing only the scratch register
CANDIDATE_POOL = LISTING_NOISE + ("ldi r24, 0x0f", "ldi r24, 0x00", "eor r24, r24", "nop")


def candidate_pool(scratch_register: int = 24) -> list[Instruction]:
    """CANDIDATE_POOL with r24 replaced by `scratch_register`."""
    return [parse_instruction(text.replace("r24", f"r{scratch_register}")) for text in CANDIDATE_POOL]


def _mode_bins(histogram: AmplitudeHistogram) -> dict[str, int]:
    """Index of the fullest bin below zero ("low") and at or above zero ("high"), for sides holding any mass."""
    modes = {}
    below = histogram.centers < 0
    for side, mask in (("low", below), ("high", ~below)):
        if histogram.counts[mask].sum() > 0:
            indices = np.flatnonzero(mask)
            modes[side] = int(indices[np.argmax(histogram.counts[indices])])
    return modes


def select_target_intervals(histograms: Sequence[AmplitudeHistogram]) -> list[Interval]:
    """Amplitude intervals covering the low and high modes shared by every model's histogram.

    For each side of zero, each histogram contributes its fullest bin; the interval spans those bins. A side is kept
    only when every histogram has mass on it. Without any shared side, the modes of the first histogram are returned
    and a warning is logged.

    Raises:
        ValueError: No histogram, histograms with different binnings, or no mass at all.
    """
    if not histograms:
        raise ValueError("at least one amplitude histogram is required")
    if not all(histograms[0].same_binning(h) for h in histograms[1:]):
        raise ValueError("amplitude histograms must share their binning")

    modes = [_mode_bins(h) for h in histograms]
    edges = histograms[0].edges
    shared = [side for side in ("low", "high") if all(side in m for m in modes)]
    if not shared:
        logger.warning("The amplitude histograms share no mode, falling back to the modes of the first model")
        modes = modes[:1]
        shared = [side for side in ("low", "high") if side in modes[0]]
        if not shared:
            raise ValueError("the amplitude histograms are empty")

    intervals = []
    for side in shared:
        bins = [m[side] for m in modes]
        intervals.append((float(edges[min(bins)]), float(edges[max(bins) + 1])))
    logger.info(f"Target amplitude intervals: {', '.join(f'[{low:.3f}, {high:.3f}]' for low, high in intervals)}")
    return intervals


def realizable_amplitude_bounds(
    stats: StandardizationStats, positions: Sequence[int], config: DeviceConfig
) -> Interval:
    """Standardized amplitudes a register write can produce at the given samples (Hamming weight 0 to 8)."""
    positions = np.asarray(positions, dtype=np.int64)
    low_power = stats.standardize_at(np.full(len(positions), config.baseline), positions)
    high_power = stats.standardize_at(np.full(len(positions), config.baseline + 8 * config.hw_gain), positions)
    both = np.concatenate([low_power, high_power])
    return float(both.min()), float(both.max())


def select_noise_instructions(
    candidates: Sequence[Instruction],
    points: Sequence[InsertionPoint],
    intervals: Sequence[Interval],
    config: DeviceConfig,
    stats: StandardizationStats,
    program: Program,
    memory_init: Optional[MemoryInit] = None,
    repetitions: int = 50,
    margin: float = 0.0,
    criterion: AmplitudeCriterion = "delta",
) -> NoiseSet:
    """Keep the candidates whose profiled amplitude, averaged over the insertion points, lies in a target interval.

    The compared amplitude is the mean delta from the program without the candidate at the same samples, or with
    `criterion="level"` the mean standardized level of those samples.

    Args:
        candidates (Sequence[Instruction]): Instructions to profile, e.g. `candidate_pool()`.
        points (Sequence[InsertionPoint]): Located insertion points.
        intervals (Sequence[Interval]): Target amplitude intervals.
        config (DeviceConfig): Device configuration of the profiling runs.
        stats (StandardizationStats): Standardization statistics of the unprotected traces.
        program (Program): Unprotected program.
        memory_init (Optional[MemoryInit], optional): Initial memory of the profiling runs. Defaults to None.
        repetitions (int, optional): Profiling runs per candidate and point. Defaults to 50.
        margin (float, optional): Widening of every interval on both sides. Defaults to 0.
        criterion (AmplitudeCriterion, optional): "delta" or "level". Defaults to "delta".

    Raises:
        CountermeasureError: No candidate qualifies.

    Returns:
        NoiseSet: Selected instructions with their profiles.
    """
    if not points:
        raise CountermeasureError("no insertion point to profile the noise candidates at")
    members, profiles = [], []
    for candidate in candidates:
        at_points = [
            measure_instruction_profile(
                candidate, program, point.instruction_index, config, repetitions, stats, memory_init
            )
            for point in points
        ]
        amplitude = float(np.mean([p.delta if criterion == "delta" else p.mean for p in at_points]))
        kept = any(low - margin <= amplitude <= high + margin for low, high in intervals)
        logger.info(f"Candidate `{candidate}`: {criterion} {amplitude:+.3f} -> {'kept' if kept else 'rejected'}")
        if kept:
            members.append(candidate)
            profiles.append(at_points)

    if not members:
        raise CountermeasureError(
            "no candidate instruction produces an amplitude in the target intervals: widen the intervals "
            "(countermeasure_interval_margin) or offer more candidates"
        )
    return NoiseSet(members=members, profiles=profiles)
