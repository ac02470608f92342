"""Self-contained invariant sweeps, runnable from the command line.

Each check returns a list of violation strings; all empty means the
installed build still reproduces every frozen analytical fact.
"""

from __future__ import annotations

import random
from itertools import product

from . import clockgame, dynamics, engine
from .equilibrium import (
    classify_profiles,
    report_sets_table,
    round3,
    sdr_analysis,
)
from .model import PERIOD_TYPES, VALUATIONS, uniform_allocate, utility


def check_uniform_rule() -> list[str]:
    bad = []
    for r1, r2 in product(range(21), range(21)):
        alloc = uniform_allocate((r1, r2))
        if sum(alloc) != 20 or not all(0 <= a <= 20 for a in alloc):
            bad.append(f"infeasible allocation for {(r1, r2)}: {alloc}")
    for peak in range(21):
        for opp in range(21):
            truth = utility(peak, uniform_allocate((peak, opp))[0])
            for dev in range(21):
                if utility(peak, uniform_allocate((dev, opp))[0]) > truth:
                    bad.append(f"profitable deviation {dev} at peak {peak} vs {opp}")
    for p1, p2 in product(range(21), range(21)):
        x1, x2 = uniform_allocate((p1, p2))
        if utility(p1, x2) > utility(p1, x1) or utility(p2, x1) > utility(p2, x2):
            bad.append(f"envy at peaks {(p1, p2)}")
    return bad


def check_schedule() -> list[str]:
    want = {
        1: ((10, 10), (13, 14)), 2: ((10, 10), (15, 14)), 3: ((16, 4), (20, 20)),
        4: ((7, 13), (16, 20)), 5: ((5, 15), (20, 18)), 6: ((9, 11), (20, 20)),
        7: ((10, 10), (14, 13)), 8: ((10, 10), (14, 15)), 9: ((4, 16), (20, 20)),
        10: ((13, 7), (20, 16)), 11: ((15, 5), (18, 20)), 12: ((11, 9), (20, 20)),
    }
    bad = []
    for period, (a, b) in enumerate(PERIOD_TYPES, start=1):
        alloc = uniform_allocate((a, b))
        pays = (utility(a, alloc[0]), utility(b, alloc[1]))
        if (alloc, pays) != want[period]:
            bad.append(f"period {period}: got {alloc} {pays}")
    return bad


def check_profile_shares() -> list[str]:
    want_u = {1: 0.546, 2: 0.546, 3: 0.020, 4: 0.034, 5: 0.025, 6: 0.043}
    bad = []
    for vid, val in VALUATIONS.items():
        _, s = classify_profiles(val)
        if round3(s.produce_uniform_share) != want_u[vid]:
            bad.append(f"valuation {vid}: produce-U share "
                       f"{round3(s.produce_uniform_share)} != {want_u[vid]}")
        if not classify_profiles(val)[0][(10, 10)].is_nash:
            bad.append(f"valuation {vid}: equal split not Nash")
    return bad


def check_report_sets() -> list[str]:
    bad = []
    for row in report_sets_table():
        if row.peak not in row.spe_supportable:
            bad.append(f"peak {row.peak} not SPE-supportable (val {row.valuation_id})")
        if row.peak in row.sdr:
            bad.append(f"peak {row.peak} marked surplus-destroying")
        if row.sdr & row.spe_supportable:
            bad.append(f"SPE and SDR sets overlap (val {row.valuation_id})")
    _, destroyed = sdr_analysis(VALUATIONS[3], agent=1)
    if destroyed[10] != 12:
        bad.append(f"mid report destruction {destroyed[10]} != 12")
    return bad


def check_clock_game() -> list[str]:
    bad = []
    for vid, val in VALUATIONS.items():
        if not clockgame.verify_osp(val):
            bad.append(f"valuation {vid}: prescribed play not obviously dominant")
        if not clockgame.verify_osp(val, horizon=1):
            bad.append(f"valuation {vid}: no one-step-simple plan")
        if clockgame.ds_terminal_allocation(val) != uniform_allocate(val.peaks):
            bad.append(f"valuation {vid}: prescribed play misses the target")
    counts = clockgame.schedule_walk(PERIOD_TYPES, 46)
    want = {"initial-1step-only": 138, "initial-0step": 414,
            "before-peak-1step-only": 598, "before-peak-0step": 506,
            "at-peak": 276, "total": 1932}
    for key, value in want.items():
        if counts[key] != value:
            bad.append(f"walk count {key}: {counts[key]} != {value}")
    return bad


def check_dynamics() -> list[str]:
    bad = []
    for vid in (1, 4):
        val = VALUATIONS[vid]
        cls, _ = classify_profiles(val)
        nash = {p for p, c in cls.items() if c.is_nash}
        if dynamics.brd_absorbing_profiles(val) != nash:
            bad.append(f"valuation {vid}: absorbing set != Nash set")
        stats = dynamics.run_brd(val, dynamics.RevisionConfig(runs=5, seed=0),
                                 start=val.peaks)
        if stats.uniform_rate != 1.0:
            bad.append(f"valuation {vid}: truthful start escaped absorption")
    return bad


def _random_period(rng: random.Random):
    spec = engine.MechanismSpec("PFU", reporting_seconds=1.0)
    rec = engine.PeriodRecorder(spec, (rng.randrange(21), rng.randrange(21)))
    t = 10
    for _ in range(rng.randrange(0, 10)):
        rec.tentative(rng.randrange(2), rng.randrange(21), t)
        t += 13
    rec.finalize(0, 1000)
    rec.finalize(1, 1000)
    rec.assign(1000)
    return rec.events


def check_engine(seed: int = 1) -> list[str]:
    rng = random.Random(seed)
    bad = []
    events = []
    while len(events) < 1000:
        events.extend(_random_period(rng))
    lines = [ev.to_json() for ev in events]
    back = [engine.SessionEvent.from_json(ln).to_json() for ln in lines]
    if lines != back:
        bad.append("event serialization round-trip not byte-identical")
    chunks, chunk = [], []
    for ev in events:
        if ev.kind == "PeriodStarted" and chunk:
            chunks.append(chunk)
            chunk = []
        chunk.append(ev)
    chunks.append(chunk)
    for chunk in chunks:
        state = engine.replay(chunk)
        if state.allocation is None or sum(state.allocation) != 20:
            bad.append("fuzzed period replayed to a bad allocation")
        if engine.audit_visibility(chunk, "PFU"):
            bad.append("visibility audit failed on a fuzzed log")
    return bad


CHECKS = {
    "uniform-rule": check_uniform_rule,
    "schedule": check_schedule,
    "profile-shares": check_profile_shares,
    "report-sets": check_report_sets,
    "clock-game": check_clock_game,
    "dynamics": check_dynamics,
    "engine": check_engine,
}


def run_all() -> dict[str, list[str]]:
    return {name: fn() for name, fn in CHECKS.items()}
