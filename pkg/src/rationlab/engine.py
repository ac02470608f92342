"""Event-sourced protocol engine for one matched pair playing one period.

Every period is an append-only log of timestamped events; the engine is
a pure fold over that log. Allocations are always recomputed from the
log and checked against what was recorded, never trusted. Four
mechanisms share the event vocabulary:

  DRU   simultaneous sealed reports, finalized at window close
  SRU   sequential reports, the second mover sees the first's final
  PFU   like DRU but tentative reports stream to the partner live
  OSPU  clock game: opening trichotomy, then continue/stop steps

Timing: event times are milliseconds since period start; the engine
only checks them against the windows the log itself establishes, so
replay never depends on a wall clock.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .model import (
    PayoffParams,
    Valuation,
    OutcomeReport,
    outcome_report,
    uniform_allocate,
    utility,
)

MECHANISMS = ("DRU", "SRU", "OSPU", "PFU")
TICK_HZ = 10  # recording rate; fixed by design

KINDS = (
    "PeriodStarted", "TentativeReport", "ReportFinalized", "StepOpened",
    "StepChoice", "OptOut", "StepResolved", "AllocationAssigned",
)


class ProtocolError(ValueError):
    """An event that is illegal in the current state."""


class IntegrityError(ValueError):
    """A log that contradicts itself on replay."""


@dataclass(frozen=True)
class MechanismSpec:
    kind: str
    reporting_seconds: float = 30.0
    ospu_step_seconds: float = 10.0

    def __post_init__(self):
        if self.kind not in MECHANISMS:
            raise ProtocolError(f"unknown mechanism {self.kind!r}")
        if self.reporting_seconds <= 0 or self.ospu_step_seconds <= 0:
            raise ProtocolError("windows must be positive")

    @property
    def reporting_ms(self) -> int:
        return int(round(self.reporting_seconds * 1000))

    @property
    def step_ms(self) -> int:
        return int(round(self.ospu_step_seconds * 1000))


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    time: int
    kind: str
    agent: int | None
    payload: dict
    v: int = 1

    def to_json(self) -> str:
        return json.dumps(
            {"v": self.v, "seq": self.seq, "time": self.time, "kind": self.kind,
             "agent": self.agent, "payload": self.payload},
            sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "SessionEvent":
        raw = json.loads(line)
        return cls(seq=raw["seq"], time=raw["time"], kind=raw["kind"],
                   agent=raw["agent"], payload=raw["payload"], v=raw["v"])


def write_events(path, events: Iterable[SessionEvent]) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(ev.to_json() + "\n")


def read_events(path) -> list[SessionEvent]:
    with open(path) as fh:
        return [SessionEvent.from_json(line) for line in fh if line.strip()]


# initial slider/cursor position: the screen midpoint, matching the clock
# game's starting allotment. Reports that never moved keep this value and
# are flagged so analysts can censor them.
INITIAL_POSITION = 10


@dataclass(frozen=True)
class PeriodState:
    """Snapshot of one period's protocol state after a prefix of the log."""

    spec: MechanismSpec | None = None
    peaks: tuple[int, int] | None = None
    supply: int = 20
    period: int = 0
    next_seq: int = 0
    last_time: int = -1
    phase: str = "unstarted"  # unstarted | reporting | reporting-second | step | done
    tentative: tuple = (None, None)
    finalized: tuple = (None, None)
    window: tuple[int, int] | None = None
    # clock-game fields
    temp: tuple[int, int] | None = None
    delta: tuple[int, int] | None = None
    step: int = 0
    step_choices: tuple = (None, None)
    opted_out: tuple = (False, False)
    step_open: bool = False
    allocation: tuple | None = None

    def effective_report(self, agent: int) -> int:
        t = self.tentative[agent]
        return INITIAL_POSITION if t is None else t

    @property
    def done(self) -> bool:
        return self.phase == "done"


def _set(t: tuple, i: int, v) -> tuple:
    out = list(t)
    out[i] = v
    return tuple(out)


def _check(cond: bool, msg: str):
    if not cond:
        raise ProtocolError(msg)


def advance(state: PeriodState, ev: SessionEvent) -> PeriodState:
    """Apply one event; deterministic, raises ProtocolError when illegal."""
    _check(ev.kind in KINDS, f"unknown event kind {ev.kind!r}")
    _check(ev.seq == state.next_seq, f"seq {ev.seq}, expected {state.next_seq}")
    _check(ev.time >= max(state.last_time, 0), "event time ran backwards")
    state = replace(state, next_seq=state.next_seq + 1, last_time=ev.time)

    if ev.kind == "PeriodStarted":
        _check(state.phase == "unstarted", "period already started")
        p = ev.payload
        spec = MechanismSpec(p["mechanism"], p["reporting_seconds"],
                             p["ospu_step_seconds"])
        peaks = tuple(p["peaks"])
        _check(len(peaks) == 2, "engine runs matched pairs")
        base = replace(state, spec=spec, peaks=peaks, supply=p.get("supply", 20),
                       period=p.get("period", 1))
        if spec.kind == "OSPU":
            half = base.supply // 2
            return replace(base, phase="step", temp=(half, half), delta=(0, 0),
                           step=0, step_open=False)
        return replace(base, phase="reporting",
                       window=(ev.time, ev.time + spec.reporting_ms))

    _check(state.phase != "unstarted", "first event must be PeriodStarted")
    _check(not state.done, "period already finished")
    kind = state.spec.kind

    if ev.kind == "TentativeReport":
        _check(kind != "OSPU", "no free-form reports in the clock game")
        _check(ev.agent in (0, 1), "tentative report needs an agent")
        value = ev.payload["value"]
        _check(isinstance(value, int) and 0 <= value <= state.supply,
               f"report {value!r} out of range")
        if kind == "SRU":
            mover = 0 if state.phase == "reporting" else 1
            _check(ev.agent == mover, "not this agent's reporting window")
        _check(state.window is not None and
               state.window[0] <= ev.time < state.window[1],
               "tentative report outside the reporting window")
        return replace(state, tentative=_set(state.tentative, ev.agent, value))

    if ev.kind == "ReportFinalized":
        _check(kind != "OSPU", "no report finalization in the clock game")
        _check(ev.agent in (0, 1), "finalization needs an agent")
        _check(state.finalized[ev.agent] is None, "duplicate finalization")
        if kind == "SRU":
            mover = 0 if state.phase == "reporting" else 1
            _check(ev.agent == mover, "finalizing out of turn")
        _check(ev.time >= state.window[1], "finalized before window close")
        expect = state.effective_report(ev.agent)
        _check(ev.payload["value"] == expect,
               f"finalized {ev.payload['value']} != last tentative {expect}")
        _check(ev.payload.get("never_moved") == (state.tentative[ev.agent] is None),
               "never-moved flag inconsistent with the log")
        out = replace(state, finalized=_set(state.finalized, ev.agent, expect))
        if kind == "SRU" and ev.agent == 0:
            return replace(out, phase="reporting-second",
                           window=(ev.time, ev.time + state.spec.reporting_ms))
        return out

    if ev.kind == "StepOpened":
        _check(kind == "OSPU", "steps exist only in the clock game")
        _check(not state.step_open, "step already open")
        _check(ev.payload["step"] == state.step, "wrong step index")
        _check(tuple(ev.payload["temp"]) == state.temp, "temp mismatch")
        return replace(state, step_open=True, step_choices=(None, None),
                       window=(ev.time, ev.time + state.spec.step_ms))

    if ev.kind == "StepChoice":
        _check(kind == "OSPU" and state.step_open, "no step is open")
        _check(ev.agent in (0, 1), "step choice needs an agent")
        _check(state.step_choices[ev.agent] is None, "agent already chose")
        _check(state.window[0] <= ev.time < state.window[1],
               "choice outside the step window")
        value = ev.payload["value"]
        if state.step == 0:
            x = state.temp[ev.agent]
            _check(value in (x - 1, x, x + 1), f"opening choice {value!r} invalid")
        else:
            _check(value == "continue", "later steps are continue or opt out")
        return replace(state, step_choices=_set(state.step_choices, ev.agent, value))

    if ev.kind == "OptOut":
        _check(kind == "OSPU" and state.step_open, "no step is open")
        _check(state.step > 0, "cannot opt out of the opening step")
        _check(ev.agent in (0, 1), "opt-out needs an agent")
        _check(state.step_choices[ev.agent] is None, "agent already chose")
        _check(state.window[0] <= ev.time < state.window[1],
               "opt-out outside the step window")
        return replace(state,
                       step_choices=_set(state.step_choices, ev.agent, "opt_out"),
                       opted_out=_set(state.opted_out, ev.agent, True))

    if ev.kind == "StepResolved":
        _check(kind == "OSPU" and state.step_open, "no step is open")
        all_in = all(c is not None for c in state.step_choices)
        _check(ev.time >= state.window[1] or all_in,
               "resolved early with choices missing")
        new = _resolve_step(state)
        _check(ev.payload["step"] == state.step, "wrong step index")
        _check(tuple(ev.payload["temp"]) == new.temp, "resolution temp mismatch")
        _check(ev.payload["outcome"] == new.phase_tag, "resolution outcome mismatch")
        return new.state

    if ev.kind == "AllocationAssigned":
        want = _expected_allocation(state)
        _check(want is not None, "period is not ready to allocate")
        got = tuple(ev.payload["amounts"])
        if got != want:
            raise IntegrityError(f"recorded allocation {got} != recomputed {want}")
        pays = tuple(ev.payload.get("payoffs", ()))
        if pays:
            expect = tuple(utility(p, a, PayoffParams(), state.supply)
                           for p, a in zip(state.peaks, want))
            if pays != expect:
                raise IntegrityError("recorded payoffs disagree with the rule")
        return replace(state, allocation=want, phase="done")

    raise ProtocolError(f"unhandled event {ev.kind}")


@dataclass(frozen=True)
class _Resolution:
    state: PeriodState
    phase_tag: str

    @property
    def temp(self):
        return self.state.temp


def _resolve_step(state: PeriodState) -> _Resolution:
    """Outcome of the open step given choices so far; lapses filled in."""
    half = state.supply // 2
    if state.step == 0:
        # a lapse means staying at the initial assignment
        c = [x if x is not None else half for x in state.step_choices]
        if c[0] == half or c[1] == half or c[0] + c[1] != state.supply:
            done = replace(state, step_open=False, allocation=None,
                           temp=state.temp, phase="allocating")
            return _Resolution(done, "terminated")
        temp = (c[0], c[1])
        delta = (c[0] - half, c[1] - half)
        nxt = replace(state, step_open=False, temp=temp, delta=delta, step=1,
                      step_choices=(None, None))
        return _Resolution(nxt, "revised")
    choices = [x if x is not None else "continue" for x in state.step_choices]
    if "opt_out" in choices:
        done = replace(state, step_open=False, phase="allocating")
        return _Resolution(done, "terminated")
    temp = (state.temp[0] + state.delta[0], state.temp[1] + state.delta[1])
    if min(temp) == 0:
        done = replace(state, step_open=False, temp=temp, phase="allocating")
        return _Resolution(done, "boundary")
    nxt = replace(state, step_open=False, temp=temp, step=state.step + 1,
                  step_choices=(None, None))
    return _Resolution(nxt, "revised")


def _expected_allocation(state: PeriodState):
    if state.spec.kind == "OSPU":
        if state.phase != "allocating":
            return None
        return state.temp
    if any(f is None for f in state.finalized):
        return None
    return uniform_allocate(state.finalized, state.supply)


def replay(events: Sequence[SessionEvent]) -> PeriodState:
    state = PeriodState()
    for ev in events:
        state = advance(state, ev)
    return state


def finalize_period(events: Sequence[SessionEvent],
                    valuation: Valuation) -> OutcomeReport:
    """Recompute the allocation from the log and score it against truth."""
    if not events or events[-1].kind != "AllocationAssigned":
        raise IntegrityError("log does not end with an allocation")
    state = replay(events)
    if state.allocation is None:
        raise IntegrityError("replay produced no allocation")
    return outcome_report(state.allocation, valuation)


def visible_to(ev: SessionEvent, viewer: int, mechanism: str | None = None,
               finished: bool = False) -> bool:
    """May this event be delivered to this seat under the information rules?

    Mechanism defaults to the one named in a PeriodStarted payload; pass
    it explicitly when filtering a partial log.
    """
    mech = mechanism or (ev.payload.get("mechanism") if ev.kind == "PeriodStarted"
                         else None)
    if ev.kind in ("PeriodStarted", "StepOpened", "StepResolved",
                   "AllocationAssigned"):
        return True
    if ev.agent == viewer:
        return True
    if ev.kind == "TentativeReport":
        return mech == "PFU"
    if ev.kind == "ReportFinalized":
        if mech == "PFU":
            return True
        if mech == "SRU" and ev.agent == 0:
            return True
        return finished
    # StepChoice / OptOut stay private; the resolution is what both see
    return False


def visible_events(events: Sequence[SessionEvent], viewer: int,
                   mechanism: str) -> list[SessionEvent]:
    return [ev for ev in events if visible_to(ev, viewer, mechanism)]


def audit_visibility(events: Sequence[SessionEvent], mechanism: str) -> list[str]:
    """Check the per-mechanism information rules over a full log.

    Returns human-readable violations; empty means the log's visible
    streams leak nothing they should not.
    """
    violations = []
    for viewer in (0, 1):
        partner = 1 - viewer
        finalized_seen = 0
        alloc_seen = False
        for ev in visible_events(events, viewer, mechanism):
            if ev.agent == partner and ev.kind == "TentativeReport":
                if mechanism != "PFU":
                    violations.append(
                        f"{mechanism}: partner tentative leaked to seat {viewer}")
            if ev.agent == partner and ev.kind == "ReportFinalized":
                finalized_seen += 1
                if mechanism == "DRU" and not alloc_seen:
                    violations.append(
                        f"DRU: partner report visible to seat {viewer} pre-allocation")
                if mechanism == "SRU" and viewer == 0 and not alloc_seen:
                    violations.append(
                        "SRU: first mover saw the second mover's report early")
            if ev.agent == partner and ev.kind in ("StepChoice", "OptOut"):
                violations.append(
                    f"OSPU: raw step action leaked to seat {viewer}")
            if ev.kind == "AllocationAssigned":
                alloc_seen = True
        if mechanism == "SRU" and viewer == 1 and finalized_seen != 1:
            violations.append(
                f"SRU: second mover saw {finalized_seen} partner finalizations")
    return violations


class PeriodRecorder:
    """Build a legal period log incrementally, validating every append.

    Server-side payloads (finalizations, step resolutions, allocations)
    are computed from the current state, so a recorder can only ever
    produce logs that replay cleanly.
    """

    def __init__(self, spec: MechanismSpec, peaks: tuple[int, int],
                 period: int = 1, supply: int = 20, start_time: int = 0):
        self.events: list[SessionEvent] = []
        self.state = PeriodState()
        self.append("PeriodStarted", None, {
            "mechanism": spec.kind,
            "peaks": list(peaks),
            "supply": supply,
            "period": period,
            "reporting_seconds": spec.reporting_seconds,
            "ospu_step_seconds": spec.ospu_step_seconds,
        }, start_time)

    def append(self, kind: str, agent: int | None, payload: dict,
               time: int) -> SessionEvent:
        ev = SessionEvent(seq=len(self.events), time=int(time), kind=kind,
                          agent=agent, payload=payload)
        self.state = advance(self.state, ev)
        self.events.append(ev)
        return ev

    def tentative(self, agent: int, value: int, time: int) -> SessionEvent:
        return self.append("TentativeReport", agent, {"value": int(value)}, time)

    def finalize(self, agent: int, time: int) -> SessionEvent:
        return self.append("ReportFinalized", agent, {
            "value": self.state.effective_report(agent),
            "never_moved": self.state.tentative[agent] is None,
        }, time)

    def open_step(self, time: int) -> SessionEvent:
        return self.append("StepOpened", None, {
            "step": self.state.step,
            "temp": list(self.state.temp),
            "delta": list(self.state.delta),
        }, time)

    def choose(self, agent: int, value, time: int) -> SessionEvent:
        return self.append("StepChoice", agent, {"value": value}, time)

    def opt_out(self, agent: int, time: int) -> SessionEvent:
        return self.append("OptOut", agent, {}, time)

    def resolve(self, time: int) -> SessionEvent:
        res = _resolve_step(self.state)
        return self.append("StepResolved", None, {
            "step": self.state.step,
            "temp": list(res.temp),
            "outcome": res.phase_tag,
        }, time)

    def assign(self, time: int) -> SessionEvent:
        amounts = _expected_allocation(self.state)
        if amounts is None:
            raise ProtocolError("period is not ready to allocate")
        payoffs = [utility(p, a, PayoffParams(), self.state.supply)
                   for p, a in zip(self.state.peaks, amounts)]
        return self.append("AllocationAssigned", None, {
            "amounts": list(amounts),
            "payoffs": payoffs,
        }, time)


# Session planning: fixed two-group split, random cross-group rematching
# each period, roles preserved (group 0 always holds seat 0 / first mover).

@dataclass(frozen=True)
class PeriodPlan:
    period: int
    valuation: Valuation
    pairing: tuple[tuple[int, int], ...]  # (seat0 subject, seat1 subject) per pair


def session_plan(roster_size: int, seed: int, schedule=None) -> list[PeriodPlan]:
    import random

    from .model import PERIOD_TYPES, PERIOD_VALUATION_IDS

    if roster_size < 2 or roster_size % 2 != 0:
        raise ProtocolError("roster size must be even and at least 2")
    schedule = list(schedule) if schedule is not None else list(PERIOD_TYPES)
    rng = random.Random(seed)
    group0 = list(range(roster_size // 2))
    group1 = list(range(roster_size // 2, roster_size))
    plans = []
    for idx, (type_a, type_b) in enumerate(schedule, start=1):
        vid = PERIOD_VALUATION_IDS[(idx - 1) % len(PERIOD_VALUATION_IDS)]
        shuffled = group1[:]
        rng.shuffle(shuffled)
        pairing = tuple(zip(group0, shuffled))
        plans.append(PeriodPlan(
            period=idx,
            valuation=Valuation((type_a, type_b), id=vid),
            pairing=pairing,
        ))
    return plans
