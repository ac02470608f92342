"""Exhaustive analysis of the one-shot and sequential report games.

Everything here is brute force over the 21 x 21 report grid: best
responses, Nash classification of all 441 profiles, the first-mover
reports supportable in a subgame perfect equilibrium of the sequential
game, and the reports that destroy surplus no matter what the opponent
does. Shares are kept as exact fractions; rounding happens only in
rendering.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

from .model import PayoffParams, Valuation, is_efficient, max_total_utility, \
    total_utility, uniform_allocate, utility

REPORTS = tuple(range(21))
_PARAMS = PayoffParams()


@lru_cache(maxsize=None)
def _alloc(r1: int, r2: int) -> tuple:
    return uniform_allocate((r1, r2))


def expected_payoff_row(own_peak: int, own_report: int, opponent_report: int):
    """Own payoff from a report pair, own report listed first."""
    return utility(own_peak, _alloc(own_report, opponent_report)[0], _PARAMS)


@lru_cache(maxsize=None)
def best_responses(own_peak: int, opponent_report: int) -> tuple[int, ...]:
    """All payoff-maximizing own reports against a fixed opponent report."""
    payoffs = [expected_payoff_row(own_peak, r, opponent_report) for r in REPORTS]
    best = max(payoffs)
    return tuple(r for r in REPORTS if payoffs[r] == best)


@dataclass(frozen=True)
class ProfileClassification:
    produces_uniform: bool
    is_nash: bool
    is_truthful: bool


@dataclass(frozen=True)
class ShareSummary:
    """Counts over the 441-profile grid with exact and rounded shares."""

    n_profiles: int
    n_produce_uniform: int
    n_nash: int
    n_nash_produce_uniform: int
    n_truthful: int

    def share(self, count: int) -> Fraction:
        return Fraction(count, self.n_profiles)

    @property
    def produce_uniform_share(self) -> Fraction:
        return self.share(self.n_produce_uniform)

    @property
    def nash_share(self) -> Fraction:
        return self.share(self.n_nash)

    @property
    def truthful_share(self) -> Fraction:
        return self.share(self.n_truthful)


def round3(x: Fraction) -> float:
    return round(float(x), 3)


def classify_profiles(valuation: Valuation) -> tuple[dict, ShareSummary]:
    """Label every report profile of the two-agent game.

    A profile is Nash when each report is a best response to the other;
    it produces the Uniform outcome when it maps to the allocation the
    rule selects for the true peaks.
    """
    if valuation.n != 2:
        raise ValueError("profile classification is defined for two agents")
    p1, p2 = valuation.peaks
    target = _alloc(p1, p2)
    out: dict[tuple[int, int], ProfileClassification] = {}
    n_u = n_nash = n_both = 0
    for r1, r2 in product(REPORTS, REPORTS):
        produces = _alloc(r1, r2) == target
        nash = (r1 in best_responses(p1, r2)) and (r2 in best_responses(p2, r1))
        out[(r1, r2)] = ProfileClassification(
            produces_uniform=produces,
            is_nash=nash,
            is_truthful=(r1, r2) == (p1, p2),
        )
        n_u += produces
        n_nash += nash
        n_both += produces and nash
    summary = ShareSummary(
        n_profiles=441,
        n_produce_uniform=n_u,
        n_nash=n_nash,
        n_nash_produce_uniform=n_both,
        n_truthful=1,
    )
    return out, summary


def overall_nash_share(valuations=None) -> Fraction:
    """Pooled Nash share across a set of valuations (schedule by default)."""
    from .model import VALUATIONS
    vals = list(valuations) if valuations is not None else list(VALUATIONS.values())
    total = sum(classify_profiles(v)[1].n_nash for v in vals)
    return Fraction(total, 441 * len(vals))


def spe_supportable_reports(valuation: Valuation, first_mover: int = 0) -> set[int]:
    """First-mover reports sustained by some subgame perfect equilibrium.

    The second mover best-responds at every first-mover report; a report
    r is supportable when some best-response selection makes r optimal:
    the selection is favorable at r and adversarial everywhere else.
    """
    if valuation.n != 2:
        raise ValueError("defined for two agents")
    own = valuation.peaks[first_mover]
    other = valuation.peaks[1 - first_mover]

    def u1(r: int, b: int):
        return expected_payoff_row(own, r, b)

    best_at = {r: max(u1(r, b) for b in best_responses(other, r)) for r in REPORTS}
    worst_at = {r: min(u1(r, b) for b in best_responses(other, r)) for r in REPORTS}
    out = set()
    for r in REPORTS:
        rivals = max(worst_at[q] for q in REPORTS if q != r)
        if best_at[r] >= rivals:
            out.add(r)
    return out


def sdr_analysis(valuation: Valuation, agent: int = 0):
    """Reports that force an inefficient outcome, with the surplus they burn.

    Returns (sdr, destroyed) where destroyed[r] is the gap between the
    best attainable utility sum and the best sum any opponent report can
    still reach once r is locked in; positive exactly on the SDR set.
    """
    if valuation.n != 2:
        raise ValueError("defined for two agents")
    best = max_total_utility(valuation)
    sdr: set[int] = set()
    destroyed: dict[int, Fraction] = {}
    for r in REPORTS:
        totals = []
        always_inefficient = True
        for opp in REPORTS:
            pair = (r, opp) if agent == 0 else (opp, r)
            alloc = _alloc(*pair)
            totals.append(total_utility(alloc, valuation))
            if is_efficient(alloc, valuation):
                always_inefficient = False
        destroyed[r] = Fraction(best - max(totals))
        if always_inefficient:
            sdr.add(r)
    return sdr, destroyed


@dataclass(frozen=True)
class ReportSets:
    """Per (valuation, peak) row: SPE-supportable and surplus-destroying sets."""

    valuation_id: int
    peak: int
    spe_supportable: frozenset[int]
    sdr: frozenset[int]

    def check(self):
        assert self.peak in self.spe_supportable
        assert self.peak not in self.sdr
        assert not (self.sdr & self.spe_supportable)


def report_sets_table(valuations=None) -> list[ReportSets]:
    """One row per (valuation, peak), both role orders of each pair."""
    from .model import VALUATIONS
    vals = list(valuations) if valuations is not None else list(VALUATIONS.values())
    rows = []
    for val in vals:
        for seat in (0, 1):
            spe = spe_supportable_reports(val, first_mover=seat)
            sdr, _ = sdr_analysis(val, agent=seat)
            rows.append(ReportSets(
                valuation_id=val.id or 0,
                peak=val.peaks[seat],
                spe_supportable=frozenset(spe),
                sdr=frozenset(sdr),
            ))
    return rows
