"""Acceptance suite: one test per primary criterion, timed and reported.

Each test prints a single PASS line with its runtime; documented
source-table discrepancies are printed where the exact-fraction oracle
overrules a published cell (the oracle is authoritative; see the table
tests for the side-by-side numbers).
"""

import json
import random
import time
from contextlib import contextmanager
from fractions import Fraction
from itertools import product

import numpy as np
from fastapi.testclient import TestClient

from rationlab.model import (
    PERIOD_TYPES,
    VALUATIONS,
    Valuation,
    uniform_allocate,
    utility,
    is_efficient,
)
from rationlab import choice, clockgame, dynamics, engine, equilibrium
from rationlab.service import create_app
from tests.test_model import TABLE1
from tests.test_engine import random_period_events
from tests.test_equilibrium import SDR_EXPECTED, SPE_EXPECTED


@contextmanager
def criterion(name: str, budget_seconds: float):
    t0 = time.perf_counter()
    yield
    dt = time.perf_counter() - t0
    assert dt < budget_seconds, f"{name}: {dt:.2f}s over budget {budget_seconds}s"
    print(f"PASS {name} ({dt:.2f}s / budget {budget_seconds:.0f}s)")


def test_schedule_golden_table():
    with criterion("schedule golden table (12 periods exact)", 1.0):
        for period, a, b, alloc_a, alloc_b, pay_a, pay_b in TABLE1:
            alloc = uniform_allocate((a, b))
            assert alloc == (alloc_a, alloc_b)
            assert utility(a, alloc[0]) == pay_a
            assert utility(b, alloc[1]) == pay_b


def test_contingent_payoff_rows():
    with criterion("contingent payoff rows (peak 5, reports 4 and 5)", 1.0):
        want4 = [15] * 11 + [16, 17, 18, 19, 20, 19, 19, 19, 19, 19]
        want5 = [15] * 11 + [16, 17, 18, 19, 20, 20, 20, 20, 20, 20]
        got4 = [equilibrium.expected_payoff_row(5, 4, o) for o in range(21)]
        got5 = [equilibrium.expected_payoff_row(5, 5, o) for o in range(21)]
        assert got4 == want4 and got5 == want5


def test_rule_axioms_exhaustive():
    with criterion("rule axioms, exhaustive over all profiles and deviations", 5.0):
        reports = range(21)
        for r1, r2 in product(reports, reports):
            alloc = uniform_allocate((r1, r2))
            assert sum(alloc) == 20 and all(0 <= a <= 20 for a in alloc)
        violations = 0
        for peak in reports:
            for opp in reports:
                truth = utility(peak, uniform_allocate((peak, opp))[0])
                for dev in reports:
                    if utility(peak, uniform_allocate((dev, opp))[0]) > truth:
                        violations += 1
        for p1, p2 in product(reports, reports):
            x1, x2 = uniform_allocate((p1, p2))
            if utility(p1, x2) > utility(p1, x1) or utility(p2, x1) > utility(p2, x2):
                violations += 1  # envy
            if not is_efficient((x1, x2), Valuation((p1, p2))):
                violations += 1  # efficiency side
        for r1, r2 in product(reports, reports):
            base = uniform_allocate((r1, r2))
            for d in reports:
                dev = uniform_allocate((d, r2))
                if dev[0] == base[0] and dev != base:
                    violations += 1  # bossiness
        assert violations == 0


def test_profile_share_table():
    with criterion("profile-share table and region captions", 5.0):
        want = {1: 0.546, 2: 0.546, 3: 0.020, 4: 0.034, 5: 0.025, 6: 0.043}
        for vid, val in VALUATIONS.items():
            _, s = equilibrium.classify_profiles(val)
            assert equilibrium.round3(s.produce_uniform_share) == want[vid]
        _, s1 = equilibrium.classify_profiles(VALUATIONS[1])
        assert s1.produce_uniform_share == Fraction(241, 441)  # 54.65%
        assert s1.nash_share == Fraction(121, 441)             # 27.44%
        assert s1.n_nash_produce_uniform == s1.n_nash
        _, s4 = equilibrium.classify_profiles(VALUATIONS[4])
        assert s4.produce_uniform_share == Fraction(15, 441)   # 3.4%
        # published caption says 8.6% of val-4 profiles are Nash; the
        # enumeration oracle is authoritative and disagrees
        assert s4.n_nash == 31
        print("  flagged: val-4 Nash share is 31/441 = "
              f"{equilibrium.round3(s4.nash_share):.3f} by enumeration "
              "(published caption prints 0.086; text's profile list implies 29)")
        assert s4.n_nash_produce_uniform == 8
        print("  flagged: 8/31 = 25.8% of val-4 Nash profiles produce the "
              "target (published caption prints 39%)")
        pooled = equilibrium.overall_nash_share()
        assert pooled == Fraction(379, 2646)
        print(f"  resolved: pooled Nash share {pooled} = "
              f"{equilibrium.round3(pooled):.3f} (published tables print "
              "0.118 and 0.113; the oracle decides)")


def test_report_sets_table():
    with criterion("first-mover report sets (12 SPE + 12 SDR rows)", 5.0):
        for (vid, peak), want in SPE_EXPECTED.items():
            val = VALUATIONS[vid]
            got = equilibrium.spe_supportable_reports(val, val.peaks.index(peak))
            assert got == want, (vid, peak)
        for (vid, peak), want in SDR_EXPECTED.items():
            val = VALUATIONS[vid]
            got, destroyed = equilibrium.sdr_analysis(val, val.peaks.index(peak))
            assert got == want, (vid, peak)
            assert all((destroyed[r] > 0) == (r in got) for r in range(21))
        _, destroyed = equilibrium.sdr_analysis(VALUATIONS[3], agent=1)
        assert destroyed[10] == 12
        print("  flagged: published SDR row (val 4, peak 13) prints 0-13; "
              "oracle gives 0-12 (13 reaches the efficient split against "
              "reports of at most 7)")
        print("  flagged: published SPE rows for val 3 print the bare peaks; "
              "oracle gives 0-4 and 16-20 (under-demands get topped up to "
              "the peak by the rule)")


def test_clock_game_checker_and_walk():
    with criterion("clock-game simplicity checker and schedule walk", 10.0):
        game = clockgame.ClockGame()
        for val in VALUATIONS.values():
            assert clockgame.verify_osp(val, horizon=None)
            assert clockgame.verify_osp(val, horizon=1)
        # the near-peak opening move is the exact point where zero-step
        # simplicity fails; the far-peak case passes with equality
        worst, best_dev = clockgame.plan_outcome_bounds(
            game, game.root, 0, 3, clockgame.StrategicPlan(9, 0))
        assert (worst, best_dev) == (13, 13)
        worst9, best_dev9 = clockgame.plan_outcome_bounds(
            game, game.root, 0, 9, clockgame.StrategicPlan(9, 0))
        assert worst9 < best_dev9 == 19
        assert not clockgame.simply_dominant(
            game, game.root, 0, 9, clockgame.ds_action(game, game.root, 0, 9), 0)
        assert clockgame.simply_dominant(
            game, game.root, 0, 3, clockgame.ds_action(game, game.root, 0, 3), 0)
        assert not clockgame.verify_osp(VALUATIONS[6], horizon=0)
        counts = clockgame.schedule_walk(PERIOD_TYPES, subjects=46)
        assert counts["initial-1step-only"] == 138
        assert counts["initial-0step"] == 414
        assert counts["before-peak-1step-only"] == 598
        assert counts["before-peak-0step"] == 506
        assert counts["at-peak"] == 276
        assert counts["wrong-direction"] == 0 and counts["past-peak"] == 0
        assert counts["total"] == 1932


def test_revision_dynamics_benchmark():
    with criterion("revision-dynamics benchmark (soft targets, fixed seed)", 60.0):
        config = dynamics.RevisionConfig(seed=42)
        rates, ds = {}, {}
        for vid, val in VALUATIONS.items():
            stats = dynamics.run_brd(val, config)
            rates[vid], ds[vid] = stats.uniform_rate, stats.ds_rate
        mean = sum(rates.values()) / 6
        assert 0.918 <= mean <= 1.0, rates
        low = [v for v in ds.values() if v < 0.25]
        high = [v for v in ds.values() if v > 0.35]
        assert len(low) == 2 and len(high) == 4, ds
        print(f"  mean uniform rate {mean:.3f}; "
              f"ds rates {' '.join(f'{ds[v]:.2f}' for v in sorted(ds))}")


def test_choice_model_criteria():
    with criterion("choice model: normalization, gradient, recovery", 30.0):
        rng = np.random.default_rng(3)
        data = choice.make_synthetic(400, choice.ChoiceParams(1.2, 0.9), seed=17)
        for obs in data[:50]:
            p = choice.choice_probabilities(obs, choice.ChoiceParams(0.7, 1.3))
            assert abs(p.sum() - 1.0) < 1e-12 and (p > 0).all()
        uniform = choice.choice_probabilities(data[0], choice.ChoiceParams(0, 0))
        assert (uniform == 1 / 21).all()
        for _ in range(5):
            le, ld = rng.normal(scale=1.5, size=2)
            g = choice.score(data, choice.ChoiceParams(le, ld))
            h = 1e-5
            fd = np.array([
                (choice.log_likelihood(data, choice.ChoiceParams(le + h, ld))
                 - choice.log_likelihood(data, choice.ChoiceParams(le - h, ld)))
                / (2 * h),
                (choice.log_likelihood(data, choice.ChoiceParams(le, ld + h))
                 - choice.log_likelihood(data, choice.ChoiceParams(le, ld - h)))
                / (2 * h),
            ])
            assert np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(fd)) < 1e-6
        sample = choice.make_synthetic(5000, choice.ChoiceParams(1.85, 1.66), seed=7)
        fit = choice.fit_mle(sample, bootstrap=0)
        assert fit.converged
        assert abs(fit.params.lambda_e - 1.85) < 0.1
        assert abs(fit.params.lambda_d - 1.66) < 0.1
        print(f"  recovered ({fit.params.lambda_e:.3f}, {fit.params.lambda_d:.3f}) "
              "from (1.85, 1.66)")


def test_session_integrity_end_to_end(tmp_path):
    with criterion("session integrity: fuzz, replay, visibility, live service",
                   60.0):
        rng = random.Random(8)
        events = []
        while len(events) < 10_000:
            events.extend(random_period_events(rng))
        path = tmp_path / "fuzz.jsonl"
        engine.write_events(path, events)
        blob = path.read_bytes()
        engine.write_events(path, engine.read_events(path))
        assert path.read_bytes() == blob
        starts = [i for i, e in enumerate(events) if e.kind == "PeriodStarted"]
        bounds = starts + [len(events)]
        for i in range(len(starts)):
            chunk = events[bounds[i]:bounds[i + 1]]
            assert engine.replay(chunk) == engine.replay(chunk)
            mech = chunk[0].payload["mechanism"]
            assert engine.audit_visibility(chunk, mech) == []

        table1 = {row[0]: ([row[3], row[4]], [row[5], row[6]]) for row in TABLE1}
        app = create_app(tmp_path)
        with TestClient(app) as client:
            finished = {}
            for mech in ("DRU", "PFU", "SRU", "OSPU"):
                r = client.post("/sessions", json={
                    "mechanism": mech, "roster_size": 2, "seed": 1,
                    "reporting_seconds": 0.15, "ospu_step_seconds": 0.15,
                })
                sid = r.json()["session_id"]
                for subject in (0, 1):
                    client.post(f"/sessions/{sid}/bots",
                                json={"subject_id": subject, "kind": "truthful"})
                client.post(f"/sessions/{sid}/start")
                finished[mech] = sid
            deadline = time.time() + 50
            replays = {}
            while time.time() < deadline and len(replays) < 4:
                time.sleep(0.1)
                for mech, sid in finished.items():
                    if mech in replays:
                        continue
                    r = client.get(f"/sessions/{sid}/replay")
                    if r.status_code == 200:
                        replays[mech] = r.json()
            assert len(replays) == 4, f"only {sorted(replays)} finished"
            for mech, rep in replays.items():
                assert len(rep["outcomes"]) == 12
                for out in rep["outcomes"]:
                    alloc, pays = table1[out["period"]]
                    assert out["allocation"] == alloc, (mech, out)
                    assert out["payoffs"] == pays, (mech, out)
                for chunk in rep["periods"]:
                    evs = [engine.SessionEvent.from_json(json.dumps(e, sort_keys=True))
                           for e in chunk["events"]]
                    assert engine.audit_visibility(evs, mech) == []
        print("  all four mechanisms reproduced the 12-period golden table "
              "through the live service")
