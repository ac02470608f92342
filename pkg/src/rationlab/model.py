"""Economic primitives for the rationing environment.

A fixed supply of a divisible good is split between agents with
single-peaked preferences. Utility is linear loss around the peak,
u = K - |peak - amount|. The allocation rule rations the long side of
the market at a common cap: excess demand is truncated from above,
excess supply is topped up from below, with the cap chosen so the
amounts exhaust the supply exactly. All arithmetic is exact (integers
and fractions), so table values reproduce bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


class DomainError(ValueError):
    """Raised when an input falls outside its documented domain."""


class ConfigurationError(ValueError):
    """Raised when a configuration is structurally invalid."""


@dataclass(frozen=True)
class PayoffParams:
    """Utility intercept. K >= supply/2 keeps two-agent payoffs non-negative."""

    K: int = 20


@dataclass(frozen=True)
class Valuation:
    """True peaks for one period plus the supply to divide."""

    peaks: tuple[int, ...]
    supply: int = 20
    id: int | None = None

    def __post_init__(self):
        if len(self.peaks) < 2:
            raise DomainError("need at least 2 agents")
        if self.supply <= 0:
            raise DomainError("supply must be positive")
        for p in self.peaks:
            if not 0 <= p <= self.supply:
                raise DomainError(f"peak {p} outside [0, {self.supply}]")

    @property
    def n(self) -> int:
        return len(self.peaks)


def utility(peak: int, amount, params: PayoffParams = PayoffParams(), supply: int = 20):
    """Payoff K - |peak - amount| of consuming `amount` with ideal `peak`."""
    if not 0 <= amount <= supply:
        raise DomainError(f"amount {amount} outside [0, {supply}]")
    return params.K - abs(peak - amount)


def _exact(x):
    """Collapse integral fractions back to int so table output stays clean."""
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


def uniform_allocate(reports: Sequence[int], supply: int = 20) -> tuple:
    """Divide `supply` among the reported demands.

    Balanced demand is honored as-is. With excess demand each agent
    receives min(report, cap); with deficient demand, max(report, cap);
    the cap is the unique level at which the amounts sum to the supply.
    The cap is located by exact search over the sorted report
    breakpoints, so the result is rational (integral for two agents with
    integer reports).
    """
    for r in reports:
        if not 0 <= r <= supply:
            raise DomainError(f"report {r} outside [0, {supply}]")
    total = sum(reports)
    if total == supply:
        return tuple(reports)
    if total > supply:
        clamp = min
        def assigned(lam):
            return sum(min(r, lam) for r in reports)
    else:
        clamp = max
        def assigned(lam):
            return sum(max(r, lam) for r in reports)
    # assigned() is monotone in the cap; bracket the solution between
    # consecutive breakpoints, then solve the linear piece exactly.
    points = sorted({0, supply, *reports})
    lo = points[0]
    for hi in points[1:]:
        if (assigned(lo) - supply) * (assigned(hi) - supply) <= 0:
            break
        lo = hi
    f_lo, f_hi = assigned(lo), assigned(hi)
    if f_lo == supply:
        lam = lo
    elif f_hi == supply:
        lam = hi
    else:
        lam = lo + Fraction(supply - f_lo, 1) * Fraction(hi - lo, f_hi - f_lo)
    return tuple(_exact(clamp(r, lam)) for r in reports)


def is_efficient(allocation: Sequence, valuation: Valuation) -> bool:
    """True when every agent consumes on the same side of their peak."""
    pairs = list(zip(allocation, valuation.peaks))
    return all(a >= p for a, p in pairs) or all(a <= p for a, p in pairs)


def max_total_utility(valuation: Valuation, params: PayoffParams = PayoffParams()):
    """Best attainable utility sum: n*K less the unavoidable demand mismatch."""
    return valuation.n * params.K - abs(valuation.supply - sum(valuation.peaks))


def total_utility(allocation: Sequence, valuation: Valuation,
                  params: PayoffParams = PayoffParams()):
    return sum(utility(p, a, params, valuation.supply)
               for a, p in zip(allocation, valuation.peaks))


def is_within1_efficient(allocation: Sequence, valuation: Valuation) -> bool:
    """True when some efficient allocation is within L-inf distance 1.

    An efficient point on the over-supplied side needs x_i >= peak_i
    with sum x = supply; the nearest such point componentwise is
    max(peak_i, a_i - 1), feasible iff that sums to at most the supply
    and no peak overshoots a_i + 1. The under-supplied side mirrors.
    """
    peaks, s = valuation.peaks, valuation.supply
    above_ok = (sum(peaks) <= s
                and all(p <= a + 1 for a, p in zip(allocation, peaks))
                and sum(max(p, a - 1) for a, p in zip(allocation, peaks)) <= s)
    below_ok = (sum(peaks) >= s
                and all(p >= a - 1 for a, p in zip(allocation, peaks))
                and sum(min(p, a + 1) for a, p in zip(allocation, peaks)) >= s)
    return above_ok or below_ok


@dataclass(frozen=True)
class OutcomeReport:
    """Performance metrics of one realized allocation."""

    allocation: tuple
    is_uniform: bool
    is_efficient: bool
    is_within1_efficient: bool
    efficiency_share: Fraction
    group_loss: Fraction


def outcome_report(allocation: Sequence, valuation: Valuation,
                   params: PayoffParams = PayoffParams()) -> OutcomeReport:
    """Score an allocation against the true peaks."""
    allocation = tuple(allocation)
    if sum(allocation) != valuation.supply:
        raise DomainError("allocation does not exhaust the supply")
    target = uniform_allocate(valuation.peaks, valuation.supply)
    best = max_total_utility(valuation, params)
    got = total_utility(allocation, valuation, params)
    return OutcomeReport(
        allocation=allocation,
        is_uniform=allocation == target,
        is_efficient=is_efficient(allocation, valuation),
        is_within1_efficient=is_within1_efficient(allocation, valuation),
        efficiency_share=Fraction(got, best),
        group_loss=Fraction(best - got),
    )


def loss_cdf(losses: Iterable) -> list[tuple]:
    """Empirical CDF of group losses as (value, cumulative fraction) steps."""
    values = sorted(losses)
    if any(v < 0 for v in values):
        raise DomainError("losses must be non-negative")
    n = len(values)
    out: list[tuple] = []
    for v in values:
        if out and out[-1][0] == v:
            continue
        out.append((v, Fraction(sum(1 for x in values if x <= v), n)))
    return out


# Per-period type assignments for the benchmark design: (type A, type B),
# six valuation pairs played twice with roles swapped on the second pass.
PERIOD_TYPES: tuple[tuple[int, int], ...] = (
    (3, 4), (15, 16), (16, 4), (3, 13), (5, 17), (9, 11),
    (4, 3), (16, 15), (4, 16), (13, 3), (17, 5), (11, 9),
)

PERIOD_VALUATION_IDS: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 1, 2, 3, 4, 5, 6)

VALUATIONS: dict[int, Valuation] = {
    vid: Valuation(peaks=PERIOD_TYPES[vid - 1], supply=20, id=vid)
    for vid in range(1, 7)
}


def schedule_valuation(period: int) -> Valuation:
    """Valuation for a 1-based schedule period, with that period's role order."""
    if not 1 <= period <= len(PERIOD_TYPES):
        raise DomainError(f"period {period} outside schedule")
    return Valuation(peaks=PERIOD_TYPES[period - 1], supply=20,
                     id=PERIOD_VALUATION_IDS[period - 1])


def load_schedule(path) -> list[tuple[int, int, int]]:
    """Read (period, typeA, typeB) rows from a whitespace/comma table.

    Lines starting with '#' and a header line of column names are skipped.
    """
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if not parts[0].isdigit():
                continue  # header
            if len(parts) < 3:
                raise ConfigurationError(f"bad schedule row: {line!r}")
            rows.append((int(parts[0]), int(parts[1]), int(parts[2])))
    return rows
