"""
Pass/fail checks of a run's results: unprotected key recovery, one-pixel efficacy, agreement of the perturbation
positions with the correlation peaks, countermeasure efficacy, the naive-conversion outcome and the overhead bound.

A check answers "n/a" when the result it compares against is missing, e.g. no unprotected rank-0 M to scale from.
"""

from typing import Optional

from app.evaluation.models import NaiveStudyReport, OverheadRow, RankCurve
from app.typings import ClassifierKind, Verdict

RANK_ZERO_MAX_TRACES = 1_000
MIN_SUCCESS_RATE = 0.5
MIN_CONTROL_FACTOR = 2.0
MIN_PEAK_AGREEMENT = 0.6
PROTECTED_TRACE_FACTOR = 10
MIN_PROTECTED_RANK = 16
BINARY_ACCURACY_RANGE = (0.45, 0.58)
NAIVE_TRACE_FACTOR = 2


def verdict(passed: Optional[bool]) -> Verdict:
    if passed is None:
        return "n/a"
    return "pass" if passed else "fail"


def recovers_key(curve: RankCurve, max_traces: int = RANK_ZERO_MAX_TRACES) -> Verdict:
    """The mean rank settles at 0 within `max_traces` attack traces."""
    m = curve.traces_to_rank_zero()
    return verdict(m is not None and m <= max_traces)


def one_pixel_efficacy(success_rate: float, control_rate: float) -> Verdict:
    """At least half the traces are fooled, and at least twice as many as on the label-shuffled control."""
    return verdict(success_rate >= MIN_SUCCESS_RATE and success_rate >= MIN_CONTROL_FACTOR * control_rate)


def peaks_agree(agreement: float) -> Verdict:
    return verdict(agreement >= MIN_PEAK_AGREEMENT)


def countermeasure_holds(
    kind: ClassifierKind, protected: RankCurve, unprotected: RankCurve, n_classes: int
) -> Verdict:
    """Protected traces keep the key out of reach at ten times the unprotected rank-0 M.

    Neural attackers must stay above mean rank 16 there, with a 2-class accuracy near chance; the template attack
    must not settle at rank 0 by then.
    """
    m_zero = unprotected.traces_to_rank_zero()
    if m_zero is None:
        return "n/a"
    m = PROTECTED_TRACE_FACTOR * m_zero
    if kind == "template":
        reached = protected.traces_to_rank_zero()
        return verdict(reached is None or reached > m)
    low, high = BINARY_ACCURACY_RANGE
    chance = n_classes != 2 or low <= protected.mean_accuracy <= high
    return verdict(protected.mean_rank_at(m) > MIN_PROTECTED_RANK and chance)


def conversion_fails_to_protect(report: NaiveStudyReport) -> Verdict:
    """The attacker retrained on converted traces still recovers the key within twice the original M."""
    m_zero = report.source.traces_to_rank_zero()
    if m_zero is None:
        return "n/a"
    converted = report.adversarial.traces_to_rank_zero()
    return verdict(converted is not None and converted <= NAIVE_TRACE_FACTOR * m_zero)


def overhead_bound(protected: OverheadRow, unprotected: OverheadRow, analytic_spread: int) -> Verdict:
    """Protected runs are slower on average and their cycle spread reaches the analytic bound."""
    spread = protected.max_cycles - protected.min_cycles
    return verdict(protected.avg_cycles > unprotected.avg_cycles and spread == analytic_spread)
