"""Agent-based dynamics on the report games.

Two simulators live here. The first runs myopic best-response dynamics
on the simultaneous report game: revision opportunities arrive as a
Poisson process, the drawn agent switches to a best response against
the opponent's standing report (keeping their report when it already is
one), and a trajectory is absorbed once both reports are mutual best
responses. The second replays the feedback mechanism in discrete 0.1s
ticks: each tick every bot observes the opponent's current tentative
report and applies its policy; the last tick's reports are finalized.

Published aggregates for these dynamics are soft targets: the original
revision protocol is not fully specified, so arrival, tie-breaking, and
sampling are explicit configuration with the defaults below.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .choice import ChoiceParams, ObservationSet, choice_probabilities
from .engine import INITIAL_POSITION, MechanismSpec, PeriodRecorder, SessionEvent
from .equilibrium import best_responses
from .model import ConfigurationError, Valuation, uniform_allocate

TIE_BREAKS = ("uniform-over-br", "closest-to-current", "closest-to-peak")


@dataclass(frozen=True)
class RevisionConfig:
    arrival_rate: float = 1.0
    tie_break: str = "uniform-over-br"
    burn_in: int = 1000       # revisions discarded at the start of a run
    samples: int = 1000       # revisions sampled per run after burn-in
    runs: int = 100           # independent trajectories averaged together
    seed: int = 0

    def __post_init__(self):
        if self.arrival_rate <= 0:
            raise ConfigurationError("arrival rate must be positive")
        if self.tie_break not in TIE_BREAKS:
            raise ConfigurationError(f"unknown tie break {self.tie_break!r}")


@dataclass
class TrajectoryStats:
    uniform_rate: float
    ds_rate: float
    occupancy: dict[tuple[int, int], float] = field(default_factory=dict)


def _pick(brs: tuple[int, ...], current: int, peak: int, rule: str,
          rng: random.Random) -> int:
    if rule == "uniform-over-br":
        return rng.choice(brs)
    anchor = current if rule == "closest-to-current" else peak
    best = min(abs(b - anchor) for b in brs)
    return rng.choice([b for b in brs if abs(b - anchor) == best])


def brd_absorbing_profiles(valuation: Valuation) -> set[tuple[int, int]]:
    """Profiles the dynamics can never leave: mutual best responses."""
    p1, p2 = valuation.peaks
    return {
        (r1, r2)
        for r1 in range(21) for r2 in range(21)
        if r1 in best_responses(p1, r2) and r2 in best_responses(p2, r1)
    }


def run_brd(valuation: Valuation, config: RevisionConfig = RevisionConfig(),
            start: tuple[int, int] | None = None) -> TrajectoryStats:
    """Simulate the revision process and report time/terminal occupancy.

    Each run starts from a uniform random profile (or `start`), burns in,
    then accumulates exponentially-weighted holding times per profile;
    an absorbed run keeps its whole remaining sample at the absorbed
    profile. Rates aggregate over all runs; the seed fixes everything.
    """
    p1, p2 = valuation.peaks
    target = uniform_allocate(valuation.peaks, valuation.supply)
    rng = random.Random(config.seed)
    occupancy: dict[tuple[int, int], float] = {}

    def absorbed(prof):
        return prof[0] in best_responses(p1, prof[1]) and \
            prof[1] in best_responses(p2, prof[0])

    for _ in range(config.runs):
        prof = start if start is not None else (rng.randrange(21), rng.randrange(21))
        revision = 0
        sampled = 0.0
        while sampled < config.samples:
            if absorbed(prof):
                # the chain never moves again: credit the rest of the sample
                remaining = config.samples - sampled
                if revision >= config.burn_in:
                    occupancy[prof] = occupancy.get(prof, 0.0) + remaining
                else:
                    occupancy[prof] = occupancy.get(prof, 0.0) + config.samples
                break
            hold = rng.expovariate(config.arrival_rate) * config.arrival_rate
            if revision >= config.burn_in:
                occupancy[prof] = occupancy.get(prof, 0.0) + hold
                sampled += hold
            agent = rng.randrange(2)
            if agent == 0:
                brs = best_responses(p1, prof[1])
                if prof[0] not in brs:
                    prof = (_pick(brs, prof[0], p1, config.tie_break, rng), prof[1])
            else:
                brs = best_responses(p2, prof[0])
                if prof[1] not in brs:
                    prof = (prof[0], _pick(brs, prof[1], p2, config.tie_break, rng))
            revision += 1

    total = sum(occupancy.values())
    uniform_mass = sum(w for prof, w in occupancy.items()
                       if uniform_allocate(prof, valuation.supply) == target)
    ds_mass = sum(w * ((prof[0] == p1) + (prof[1] == p2)) / 2
                  for prof, w in occupancy.items())
    return TrajectoryStats(
        uniform_rate=uniform_mass / total,
        ds_rate=ds_mass / total,
        occupancy={k: v / total for k, v in occupancy.items()},
    )


@dataclass(frozen=True)
class BotPolicy:
    """Tick-level reporting behavior for simulated participants."""

    kind: str  # truthful | myopic-best-responder | logit | stubborn
    latency: int = 0
    report: int | None = None          # stubborn target
    lambda_e: float = 0.0              # logit sensitivities
    lambda_d: float = 0.0

    def __post_init__(self):
        kinds = ("truthful", "myopic-best-responder", "logit", "stubborn")
        if self.kind not in kinds:
            raise ConfigurationError(f"unknown bot kind {self.kind!r}")
        if self.kind == "stubborn" and self.report is None:
            raise ConfigurationError("stubborn bot needs a report")


def bot_action(policy: BotPolicy, peak: int, own: int, opp: int,
               observed: set[int], tick: int, rng: random.Random) -> int:
    """Report selected by a bot this tick, given what it has seen."""
    if tick < policy.latency:
        return own
    if policy.kind == "truthful":
        return peak
    if policy.kind == "stubborn":
        return policy.report
    if policy.kind == "myopic-best-responder":
        brs = best_responses(peak, opp)
        if own in brs:
            return own
        return rng.choice(brs)
    # logit: sample a report from the attraction model over what was seen
    obs = ObservationSet(peak, frozenset(observed or {opp}), final_report=own)
    probs = choice_probabilities(obs, ChoiceParams(policy.lambda_e, policy.lambda_d))
    return rng.choices(range(21), weights=probs)[0]


def run_pfu_sim(valuation: Valuation, policies: tuple[BotPolicy, BotPolicy],
                ticks: int = 100, seed: int = 0) -> list[SessionEvent]:
    """Two bots play one feedback-mechanism period; returns the event log.

    The log is built through the protocol engine, so it satisfies the
    session-event schema and replays to the same final allocation.
    """
    if ticks <= 0:
        raise ConfigurationError("ticks must be positive")
    if valuation.n != 2:
        raise ConfigurationError("simulator runs matched pairs")
    spec = MechanismSpec("PFU", reporting_seconds=ticks / 10)
    rec = PeriodRecorder(spec, valuation.peaks, supply=valuation.supply)
    rngs = [random.Random(seed * 7919 + i) for i in (0, 1)]
    current = [INITIAL_POSITION, INITIAL_POSITION]
    observed: list[set[int]] = [set(), set()]
    for tick in range(ticks):
        time_ms = tick * 100
        stale = tuple(current)
        for agent in (0, 1):
            observed[agent].add(stale[1 - agent])
            current[agent] = bot_action(
                policies[agent], valuation.peaks[agent], stale[agent],
                stale[1 - agent], observed[agent], tick, rngs[agent])
            rec.tentative(agent, current[agent], time_ms + agent)
    close = ticks * 100
    rec.finalize(0, close)
    rec.finalize(1, close)
    rec.assign(close)
    return rec.events
