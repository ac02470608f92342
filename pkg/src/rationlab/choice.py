"""Structural choice model for finalized reports.

A report's attraction is lambda_e * E(x) + lambda_d * D(x): E(x) flags
reports that maximize payoff against every partner report observed
during the reporting period ("empirically optimal"), D(x) flags the own
peak (the weakly dominant report). Choice probabilities are the softmax
of attractions over the 21 reports; the two sensitivities are estimated
by Newton ascent on the (concave) log-likelihood, with cluster-level
bootstrap standard errors.
"""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .model import DomainError
from .equilibrium import REPORTS, best_responses

N_REPORTS = len(REPORTS)


@dataclass(frozen=True)
class ObservationSet:
    """One subject-period: what they saw and what they locked in."""

    own_peak: int
    observed_partner_reports: frozenset[int]
    final_report: int
    cluster_id: str = "s0"

    def __post_init__(self):
        if not self.observed_partner_reports:
            raise DomainError("observation set must be non-empty")
        if not 0 <= self.final_report <= 20:
            raise DomainError("final report outside 0..20")


@dataclass(frozen=True)
class ChoiceParams:
    lambda_e: float
    lambda_d: float


def empirically_optimal_set(obs: ObservationSet) -> frozenset[int]:
    """Reports that best-respond to every observed partner report.

    Never empty: the peak best-responds to everything. Antitone in the
    observation set - more observations can only shrink it.
    """
    out = None
    for seen in obs.observed_partner_reports:
        brs = set(best_responses(obs.own_peak, seen))
        out = brs if out is None else out & brs
    return frozenset(out)


def attractions(obs: ObservationSet, params: ChoiceParams) -> np.ndarray:
    e_set = empirically_optimal_set(obs)
    return np.array([
        params.lambda_e * (x in e_set) + params.lambda_d * (x == obs.own_peak)
        for x in REPORTS
    ])


def choice_probabilities(obs: ObservationSet, params: ChoiceParams) -> np.ndarray:
    """Softmax of attractions over all 21 reports."""
    a = attractions(obs, params)
    a -= a.max()
    w = np.exp(a)
    return w / w.sum()


# The likelihood only depends on the size of the E-set and on whether the
# chosen report was the peak, merely empirically optimal, or neither.
_PEAK, _EONLY, _NONE = "peak", "e_only", "none"


def _group(data) -> Counter:
    groups: Counter = Counter()
    for obs in data:
        e_set = empirically_optimal_set(obs)
        if obs.final_report == obs.own_peak:
            cat = _PEAK
        elif obs.final_report in e_set:
            cat = _EONLY
        else:
            cat = _NONE
        groups[(len(e_set), cat)] += 1
    return groups


def _cell_stats(s: int, le: float, ld: float):
    """Per-group log-partition and inclusion probabilities (overflow-safe)."""
    m = max(le + ld, le, 0.0)
    w_peak = math.exp(le + ld - m)
    w_e = math.exp(le - m)
    z = w_peak + (s - 1) * w_e + (N_REPORTS - s) * math.exp(-m)
    p_d = w_peak / z
    p_e = (w_peak + (s - 1) * w_e) / z
    return m + math.log(z), p_e, p_d


def grouped_log_likelihood(groups: Counter, params: ChoiceParams) -> float:
    le, ld = params.lambda_e, params.lambda_d
    ll = 0.0
    for (s, cat), n in groups.items():
        logz, _, _ = _cell_stats(s, le, ld)
        a = le + ld if cat == _PEAK else le if cat == _EONLY else 0.0
        ll += n * (a - logz)
    return ll


def log_likelihood(data, params: ChoiceParams) -> float:
    return grouped_log_likelihood(_group(data), params)


def score(data, params: ChoiceParams) -> np.ndarray:
    """Analytic gradient of the log-likelihood in (lambda_e, lambda_d)."""
    return _grouped_score(_group(data), params)


def _grouped_score(groups: Counter, params: ChoiceParams) -> np.ndarray:
    le, ld = params.lambda_e, params.lambda_d
    g = np.zeros(2)
    for (s, cat), n in groups.items():
        _, p_e, p_d = _cell_stats(s, le, ld)
        ind_e = 1.0 if cat in (_PEAK, _EONLY) else 0.0
        ind_d = 1.0 if cat == _PEAK else 0.0
        g += n * np.array([ind_e - p_e, ind_d - p_d])
    return g


def _grouped_hessian(groups: Counter, params: ChoiceParams) -> np.ndarray:
    le, ld = params.lambda_e, params.lambda_d
    h = np.zeros((2, 2))
    for (s, cat), n in groups.items():
        _, p_e, p_d = _cell_stats(s, le, ld)
        var_e = p_e * (1 - p_e)
        var_d = p_d * (1 - p_d)
        cov = p_d * (1 - p_e)
        h -= n * np.array([[var_e, cov], [cov, var_d]])
    return h


@dataclass(frozen=True)
class FitResult:
    params: ChoiceParams
    std_errors: tuple[float, float] | None
    log_likelihood: float
    converged: bool
    boundary: bool
    n_observations: int
    n_bootstrap: int
    single_cluster: bool = False


_LAMBDA_CAP = 40.0


def _newton(groups: Counter, tol: float = 1e-8, max_iter: int = 200):
    """Ascend the concave grouped log-likelihood from the origin."""
    le, ld = 0.0, 0.0
    for _ in range(max_iter):
        params = ChoiceParams(le, ld)
        g = _grouped_score(groups, params)
        if math.hypot(*g) < tol:
            return params, True, False
        h = _grouped_hessian(groups, params)
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step = g / max(1.0, abs(np.trace(h)))
        norm = float(np.linalg.norm(step))
        if not math.isfinite(norm) or norm > 10.0:
            # near-singular curvature: fall back to a clipped ascent step
            step = step * (10.0 / norm) if math.isfinite(norm) else g / max(
                1.0, float(np.linalg.norm(g)))
        # backtrack so the likelihood never decreases
        base = grouped_log_likelihood(groups, params)
        scale = 1.0
        for _ in range(40):
            cand = ChoiceParams(le + scale * step[0], ld + scale * step[1])
            if grouped_log_likelihood(groups, cand) >= base:
                break
            scale /= 2
        le += scale * step[0]
        ld += scale * step[1]
        if abs(le) > _LAMBDA_CAP or abs(ld) > _LAMBDA_CAP:
            # divergence to the boundary: data are separable along this axis
            return ChoiceParams(le, ld), False, True
    return ChoiceParams(le, ld), False, False


def _separated(groups: Counter) -> bool:
    """True when the likelihood has no finite maximizer.

    The sufficient statistics are the counts of finals that are
    empirically optimal (nE) and that are the peak (nD); if either count
    sits at 0 or at the sample size, the likelihood keeps increasing
    along some parameter ray and any finite estimate would be spurious.
    Groups where the E-set covers all reports carry no information about
    lambda_e and are ignored for the nE check.
    """
    n = sum(groups.values())
    n_d = sum(c for (s, cat), c in groups.items() if cat == _PEAK)
    informative = {(s, cat): c for (s, cat), c in groups.items() if s < N_REPORTS}
    n_inf = sum(informative.values())
    n_e = sum(c for (s, cat), c in informative.items() if cat != _NONE)
    if n_d in (0, n):
        return True
    return n_inf > 0 and n_e in (0, n_inf)


def fit_mle(data, bootstrap: int = 1000, seed: int = 0,
            tol: float = 1e-8) -> FitResult:
    """Maximum likelihood fit with cluster-bootstrap standard errors.

    Bootstrap resamples whole clusters with replacement; a single-cluster
    dataset has no resampling variation, so standard errors are reported
    as undefined rather than zero.
    """
    data = list(data)
    if not data:
        raise DomainError("no observations to fit")
    groups = _group(data)
    params, converged, boundary = _newton(groups, tol=tol)
    if _separated(groups):
        converged, boundary = False, True
    ll = grouped_log_likelihood(groups, params)

    by_cluster: dict[str, Counter] = defaultdict(Counter)
    for obs in data:
        by_cluster[obs.cluster_id] += _group([obs])
    clusters = sorted(by_cluster)
    single = len(clusters) == 1

    se = None
    if bootstrap > 0 and not single and not boundary:
        rng = np.random.default_rng(seed)
        draws = []
        for _ in range(bootstrap):
            pick = rng.integers(0, len(clusters), size=len(clusters))
            boot_groups: Counter = Counter()
            for idx in pick:
                boot_groups += by_cluster[clusters[idx]]
            p, ok, hit_edge = _newton(boot_groups, tol=max(tol, 1e-6))
            if ok and not hit_edge:
                draws.append((p.lambda_e, p.lambda_d))
        if len(draws) >= 2:
            arr = np.array(draws)
            se = (float(arr[:, 0].std(ddof=1)), float(arr[:, 1].std(ddof=1)))
    return FitResult(
        params=params,
        std_errors=se,
        log_likelihood=ll,
        converged=converged,
        boundary=boundary,
        n_observations=len(data),
        n_bootstrap=bootstrap,
        single_cluster=single,
    )


def predicted_peak_rate(data, params: ChoiceParams) -> float:
    """Mean model probability of selecting one's own peak."""
    data = list(data)
    if not data:
        raise DomainError("no observations")
    total = 0.0
    for obs in data:
        s = len(empirically_optimal_set(obs))
        _, _, p_d = _cell_stats(s, params.lambda_e, params.lambda_d)
        total += p_d
    return total / len(data)


def make_synthetic(n: int, params: ChoiceParams, seed: int = 0,
                   n_clusters: int = 8, max_observed: int = 4) -> list[ObservationSet]:
    """Draw observation sets at random and sample finals from the model."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        peak = int(rng.integers(0, 21))
        k = int(rng.integers(1, max_observed + 1))
        seen = frozenset(int(v) for v in rng.integers(0, 21, size=k))
        obs = ObservationSet(peak, seen, 0, f"c{i % n_clusters}")
        probs = choice_probabilities(obs, params)
        final = int(rng.choice(N_REPORTS, p=probs))
        out.append(ObservationSet(peak, seen, final, f"c{i % n_clusters}"))
    return out


def load_observations_csv(path) -> list[ObservationSet]:
    """Rows: own_peak, observed reports (space-separated), final, cluster."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#") or not row[0].strip().isdigit():
                continue
            peak = int(row[0])
            seen = frozenset(int(v) for v in row[1].split())
            final = int(row[2])
            cluster = row[3].strip() if len(row) > 3 else "s0"
            out.append(ObservationSet(peak, seen, final, cluster))
    return out


def observations_from_log(events, own_peak: int, agent: int,
                          cluster_id: str = "s0") -> list[ObservationSet]:
    """Extract one observation set from a session-period event log.

    Observed partner reports are the distinct tentative (and finalized)
    values the partner exposed to this agent during the reporting
    period; periods where the agent saw nothing yield no observation and
    are excluded by construction.
    """
    from .engine import visible_to

    events = list(events)
    mechanism = events[0].payload.get("mechanism") if events else None
    seen: set[int] = set()
    final = None
    for ev in events:
        if ev.kind in ("TentativeReport", "ReportFinalized") and ev.agent == 1 - agent:
            if visible_to(ev, agent, mechanism):
                seen.add(ev.payload["value"])
        if ev.kind == "ReportFinalized" and ev.agent == agent:
            final = ev.payload["value"]
    if not seen or final is None:
        return []
    return [ObservationSet(own_peak, frozenset(seen), final, cluster_id)]
