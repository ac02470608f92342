"""Live session service: lobby, real-time play, bots, persistence, replay.

One asyncio task drives each session: every tick (10 Hz) it feeds queued
participant actions through the protocol engine, lets attached bots act
through the same path, resolves any windows that closed, and fans
visibility-filtered events and snapshot state frames out to subscribers.
All pairs of a period play concurrently inside that one task, so a
session's events never interleave across writers. Finished periods are
flushed to sessions/<id>/events.jsonl as contiguous per-pair segments
that replay through the engine from scratch.
"""

from __future__ import annotations

import asyncio
import json
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .dynamics import BotPolicy, bot_action
from .engine import (
    INITIAL_POSITION,
    MechanismSpec,
    PeriodRecorder,
    ProtocolError,
    SessionEvent,
    finalize_period,
    session_plan,
    visible_to,
)
from .model import PERIOD_TYPES, Valuation, uniform_allocate, utility

TICK_SECONDS = 0.1  # 10 Hz clock, matching the recording rate


@dataclass
class Seat:
    subject_id: int
    token: str
    occupant: str = "open"  # open | human | bot
    policy: BotPolicy | None = None
    queues: list = field(default_factory=list)  # subscriber queues


@dataclass
class PairRun:
    pair_index: int
    subjects: tuple[int, int]
    recorder: PeriodRecorder
    peaks: tuple[int, int]
    started_monotonic: float
    pending: list = field(default_factory=list)  # (subject_id, action dict)
    bot_state: dict = field(default_factory=dict)
    done: bool = False

    def now_ms(self) -> int:
        return int((time.monotonic() - self.started_monotonic) * 1000)

    def seat_of(self, subject_id: int) -> int:
        return self.subjects.index(subject_id)


class Session:
    def __init__(self, session_id: str, spec: MechanismSpec, roster_size: int,
                 seed: int, data_dir: Path, periods: int | None = None):
        self.id = session_id
        self.spec = spec
        self.seed = seed
        self.status = "lobby"
        self.current_period = 0
        schedule = PERIOD_TYPES[:periods] if periods else PERIOD_TYPES
        self.plans = session_plan(roster_size, seed, schedule)
        self.seats = {
            sid: Seat(subject_id=sid, token=f"t{sid}-{secrets.token_hex(8)}")
            for sid in range(roster_size)
        }
        self.dir = data_dir / "sessions" / session_id
        self.dir.mkdir(parents=True, exist_ok=True)
        self.earnings = {sid: 0 for sid in self.seats}
        self.outcomes: list[dict] = []
        self.task: asyncio.Task | None = None
        self.lock = asyncio.Lock()
        self.live_pairs: dict[int, PairRun] = {}  # subject -> running pair
        self._write_meta()

    # -- descriptor / persistence -------------------------------------

    def descriptor(self) -> dict:
        status = self.status
        if status == "running":
            status = f"running({self.current_period})"
        return {
            "session_id": self.id,
            "mechanism": self.spec.kind,
            "reporting_seconds": self.spec.reporting_seconds,
            "ospu_step_seconds": self.spec.ospu_step_seconds,
            "roster": [
                {"subject_id": s.subject_id, "occupant": s.occupant,
                 "group": 0 if s.subject_id < len(self.seats) // 2 else 1,
                 "role": "first" if s.subject_id < len(self.seats) // 2 else "second"}
                for s in self.seats.values()
            ],
            "periods": len(self.plans),
            "status": status,
        }

    def _write_meta(self):
        meta = self.descriptor()
        meta["seed"] = self.seed
        meta["ecu_per_dollar"] = 1
        (self.dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    def _flush_segment(self, events: list[SessionEvent]):
        with open(self.dir / "events.jsonl", "a") as fh:
            for ev in events:
                fh.write(ev.to_json() + "\n")

    # -- lobby ----------------------------------------------------------

    def seat_by_token(self, token: str) -> Seat:
        for seat in self.seats.values():
            if seat.token == token:
                return seat
        raise HTTPException(403, "unknown token")

    def join(self, token: str) -> Seat:
        seat = self.seat_by_token(token)
        if seat.occupant == "bot":
            raise HTTPException(409, "seat already taken by a bot")
        seat.occupant = "human"
        return seat

    def attach_bot(self, subject_id: int, policy: BotPolicy):
        if subject_id not in self.seats:
            raise HTTPException(404, "no such seat")
        seat = self.seats[subject_id]
        if seat.occupant != "open":
            raise HTTPException(409, "seat already occupied")
        seat.occupant = "bot"
        seat.policy = policy

    def ready(self) -> bool:
        return all(s.occupant != "open" for s in self.seats.values())

    # -- live play -------------------------------------------------------

    async def run(self):
        self.status = "running"
        try:
            for plan in self.plans:
                self.current_period = plan.period
                await self._run_period(plan)
            self.status = "finished"
        finally:
            self.live_pairs = {}
            self._write_meta()
            self._broadcast_all({"type": "session", "status": self.status})

    async def _run_period(self, plan):
        pairs = []
        for k, (a, b) in enumerate(plan.pairing):
            rec = PeriodRecorder(self.spec, plan.valuation.peaks,
                                 period=plan.period)
            run = PairRun(pair_index=k, subjects=(a, b), recorder=rec,
                          peaks=plan.valuation.peaks,
                          started_monotonic=time.monotonic())
            pairs.append(run)
            for ev in rec.events:
                self._emit(run, ev)
        async with self.lock:
            for run in pairs:
                for sid in run.subjects:
                    self.live_pairs[sid] = run
        if self.spec.kind == "OSPU":
            for run in pairs:
                self._open_step(run)
        while True:
            async with self.lock:
                for run in pairs:
                    if not run.done:
                        self._tick_pair(run)
                for run in pairs:
                    self._send_frames(run)
            if all(run.done for run in pairs):
                break
            await asyncio.sleep(TICK_SECONDS)
        for run in pairs:
            valuation = Valuation(run.peaks)
            report = finalize_period(run.recorder.events, valuation)
            payoffs = run.recorder.events[-1].payload["payoffs"]
            for seat_idx, sid in enumerate(run.subjects):
                self.earnings[sid] += payoffs[seat_idx]
            self.outcomes.append({
                "period": plan.period,
                "pair": run.pair_index,
                "subjects": list(run.subjects),
                "peaks": list(run.peaks),
                "allocation": list(report.allocation),
                "payoffs": payoffs,
                "is_uniform": report.is_uniform,
            })
            self._flush_segment(run.recorder.events)
        async with self.lock:
            for run in pairs:
                for sid in run.subjects:
                    self.live_pairs.pop(sid, None)

    def _tick_pair(self, run: PairRun):
        now = run.now_ms()
        # queued participant actions first, then bots through the same path
        pending, run.pending = run.pending, []
        for subject_id, action in pending:
            self._apply_action(run, subject_id, action, now)
        # a resolution can open a fresh window (second mover's turn); give
        # bots one same-tick chance at it so short windows are never missed
        passes = 1 if self.spec.kind == "OSPU" else 2
        for _ in range(passes):
            before = run.recorder.state
            for seat_idx, sid in enumerate(run.subjects):
                seat = self.seats[sid]
                if seat.occupant == "bot":
                    for action in self._bot_actions(run, seat_idx, seat.policy,
                                                    run.now_ms()):
                        self._apply_action(run, sid, action, run.now_ms(),
                                           strict=False)
            self._resolve_windows(run, run.now_ms())
            if run.done or run.recorder.state == before:
                break

    def _apply_action(self, run: PairRun, subject_id: int, action: dict,
                      now: int, strict: bool = True):
        seat_idx = run.seat_of(subject_id)
        try:
            kind = action.get("kind")
            if kind == "tentative":
                ev = run.recorder.tentative(seat_idx, int(action["value"]), now)
            elif kind == "step_choice":
                ev = run.recorder.choose(seat_idx, action["value"], now)
            elif kind == "opt_out":
                ev = run.recorder.opt_out(seat_idx, now)
            else:
                raise ProtocolError(f"unknown action {kind!r}")
            self._emit(run, ev)
            return None
        except (ProtocolError, KeyError, TypeError, ValueError) as exc:
            if strict:
                self._notify(subject_id, {"type": "rejected",
                                          "reason": str(exc), "action": action})
            return str(exc)

    def _bot_actions(self, run: PairRun, seat_idx: int, policy: BotPolicy,
                     now: int) -> list[dict]:
        state = run.recorder.state
        peak = run.peaks[seat_idx]
        rng = run.bot_state.setdefault(
            ("rng", seat_idx),
            __import__("random").Random(self.seed * 7919 + seat_idx))
        tick = now // 100
        if self.spec.kind != "OSPU":
            if state.finalized[seat_idx] is not None or state.window is None:
                return []
            if self.spec.kind == "SRU":
                mover = 0 if state.phase == "reporting" else 1
                if seat_idx != mover:
                    return []
            own = state.effective_report(seat_idx)
            opp = state.effective_report(1 - seat_idx)
            observed = run.bot_state.setdefault(("seen", seat_idx), set())
            if self.spec.kind == "PFU" or (self.spec.kind == "SRU" and seat_idx == 1):
                observed.add(opp)
            else:
                opp = INITIAL_POSITION  # nothing observable: behave as at start
            value = bot_action(policy, peak, own, opp, observed, tick, rng)
            if value != own or ("sent", seat_idx) not in run.bot_state:
                run.bot_state[("sent", seat_idx)] = True
                return [{"kind": "tentative", "value": value}]
            return []
        # clock game: ride toward the policy's target report, then stop
        if not state.step_open or state.step_choices[seat_idx] is not None:
            return []
        target = policy.report if policy.kind == "stubborn" else peak
        x = state.temp[seat_idx]
        if state.step == 0:
            pick = x + 1 if target > x else x - 1 if target < x else x
            return [{"kind": "step_choice", "value": pick}]
        toward = state.delta[seat_idx] * (target - x) > 0
        if toward:
            return [{"kind": "step_choice", "value": "continue"}]
        return [{"kind": "opt_out"}]

    def _resolve_windows(self, run: PairRun, now: int):
        rec = run.recorder
        state = rec.state
        spec = self.spec
        if spec.kind == "OSPU":
            if state.phase == "step" and state.step_open:
                all_in = all(c is not None for c in state.step_choices)
                if all_in or now >= state.window[1]:
                    self._emit(run, rec.resolve(max(now, state.window[1])
                                                if not all_in else now))
                    state = rec.state
                    if state.phase == "step":
                        self._open_step(run)
            if rec.state.phase == "allocating":
                self._emit(run, rec.assign(rec.state.last_time))
                run.done = True
            return
        if state.phase in ("reporting", "reporting-second") and now >= state.window[1]:
            close = state.window[1]
            if spec.kind == "SRU":
                mover = 0 if state.phase == "reporting" else 1
                self._emit(run, rec.finalize(mover, close))
            else:
                for seat_idx in (0, 1):
                    if rec.state.finalized[seat_idx] is None:
                        self._emit(run, rec.finalize(seat_idx, close))
        if all(f is not None for f in rec.state.finalized):
            self._emit(run, rec.assign(rec.state.last_time))
            run.done = True

    def _open_step(self, run: PairRun):
        at = max(run.now_ms(), run.recorder.state.last_time)
        ev = run.recorder.open_step(at)
        self._emit(run, ev)

    # -- fan-out ----------------------------------------------------------

    def _emit(self, run: PairRun, ev: SessionEvent):
        for seat_idx, sid in enumerate(run.subjects):
            if visible_to(ev, seat_idx, self.spec.kind):
                self._notify(sid, {"type": "event", "session": self.id,
                                   "period": run.recorder.state.period,
                                   "pair": run.pair_index,
                                   "seat": seat_idx,
                                   "event": json.loads(ev.to_json())})

    def _send_frames(self, run: PairRun):
        for seat_idx, sid in enumerate(run.subjects):
            self._notify(sid, self.frame(run, seat_idx))

    def _notify(self, subject_id: int, message: dict):
        for q in self.seats[subject_id].queues:
            if q.qsize() < 4096:
                q.put_nowait(message)

    def _broadcast_all(self, message: dict):
        for seat in self.seats.values():
            for q in seat.queues:
                q.put_nowait(message)

    # -- snapshot frames ---------------------------------------------------

    def frame(self, run: PairRun, seat_idx: int) -> dict:
        """Full visible state for one participant: everything the client
        renders is in here, never inferred from earlier frames."""
        state = run.recorder.state
        now = run.now_ms()
        peak = run.peaks[seat_idx]
        base = {
            "type": "frame",
            "session": self.id,
            "mechanism": self.spec.kind,
            "period": state.period,
            "pair": run.pair_index,
            "seat": seat_idx,
            "seq": state.next_seq,
            "phase": state.phase,
            "own_peak": peak,
            "partner_peak": run.peaks[1 - seat_idx],
            "supply": state.supply,
            "countdown_ms": max(0, state.window[1] - now) if state.window else 0,
        }
        if state.done:
            base["allocation"] = list(state.allocation)
            base["payoffs"] = [utility(p, a) for p, a in
                               zip(run.peaks, state.allocation)]
            base["own_payoff"] = base["payoffs"][seat_idx]
            return base
        if self.spec.kind == "OSPU":
            base["step"] = state.step
            base["step_open"] = state.step_open
            base["temp_own"] = state.temp[seat_idx]
            base["temp_partner"] = state.temp[1 - seat_idx]
            base["own_payoff_if_stop"] = utility(peak, state.temp[seat_idx])
            if state.step > 0:
                base["next_own"] = state.temp[seat_idx] + state.delta[seat_idx]
                base["next_partner"] = state.temp[1 - seat_idx] + state.delta[1 - seat_idx]
            base["acted"] = state.step_choices[seat_idx] is not None
            return base
        own = state.effective_report(seat_idx)
        base["own_tentative"] = own
        base["own_finalized"] = state.finalized[seat_idx]
        partner_visible = (
            self.spec.kind == "PFU"
            or (self.spec.kind == "SRU" and seat_idx == 1
                and state.phase == "reporting-second")
        )
        if self.spec.kind == "SRU":
            base["mover"] = 0 if state.phase == "reporting" else 1
        if partner_visible:
            partner = (state.finalized[0] if self.spec.kind == "SRU"
                       else state.effective_report(1 - seat_idx))
            alloc = uniform_allocate(
                (own, partner) if seat_idx == 0 else (partner, own), state.supply)
            base["partner_report"] = partner
            base["tentative_allotments"] = [alloc[seat_idx], alloc[1 - seat_idx]]
            base["own_payoff_preview"] = utility(peak, alloc[seat_idx])
            base["payoff_by_report"] = [
                utility(peak, uniform_allocate(
                    (r, partner) if seat_idx == 0 else (partner, r),
                    state.supply)[seat_idx])
                for r in range(state.supply + 1)
            ]
        return base

    def lobby_frame(self, seat_idx_subject: int) -> dict:
        return {"type": "frame", "session": self.id, "phase": self.status,
                "mechanism": self.spec.kind, "subject": seat_idx_subject}


# ----------------------------------------------------------------------
# HTTP/WS surface


class CreateSession(BaseModel):
    mechanism: str
    roster_size: int = 2
    seed: int = 0
    reporting_seconds: float = 30.0
    ospu_step_seconds: float = 10.0
    periods: int | None = None


class JoinBody(BaseModel):
    token: str


class BotBody(BaseModel):
    subject_id: int
    kind: str
    report: int | None = None
    lambda_e: float = 0.0
    lambda_d: float = 0.0
    latency: int = 0


def create_app(data_dir: str | Path = "data") -> FastAPI:
    app = FastAPI(title="rationlab session service")
    app.state.data_dir = Path(data_dir)
    app.state.sessions: dict[str, Session] = {}

    def get_session(session_id: str) -> Session:
        try:
            return app.state.sessions[session_id]
        except KeyError:
            raise HTTPException(404, "no such session")

    @app.post("/sessions")
    def create_session(body: CreateSession):
        if body.roster_size < 2 or body.roster_size % 2 != 0:
            raise HTTPException(422, "roster size must be even and at least 2")
        try:
            spec = MechanismSpec(body.mechanism, body.reporting_seconds,
                                 body.ospu_step_seconds)
        except ProtocolError as exc:
            raise HTTPException(422, str(exc))
        session_id = f"s{secrets.token_hex(6)}"
        session = Session(session_id, spec, body.roster_size, body.seed,
                          app.state.data_dir, periods=body.periods)
        app.state.sessions[session_id] = session
        out = session.descriptor()
        out["tokens"] = {s.subject_id: s.token for s in session.seats.values()}
        return out

    @app.post("/sessions/{session_id}/join")
    def join(session_id: str, body: JoinBody):
        session = get_session(session_id)
        seat = session.join(body.token)
        return {"subject_id": seat.subject_id,
                "group": 0 if seat.subject_id < len(session.seats) // 2 else 1,
                "session": session.descriptor()}

    @app.post("/sessions/{session_id}/bots")
    def attach_bot(session_id: str, body: BotBody):
        session = get_session(session_id)
        try:
            policy = BotPolicy(kind=body.kind, report=body.report,
                               lambda_e=body.lambda_e, lambda_d=body.lambda_d,
                               latency=body.latency)
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        session.attach_bot(body.subject_id, policy)
        return {"ok": True, "subject_id": body.subject_id}

    @app.post("/sessions/{session_id}/start")
    async def start(session_id: str):
        session = get_session(session_id)
        if session.status != "lobby":
            raise HTTPException(409, "session already started")
        if not session.ready():
            raise HTTPException(409, "seats still open")
        session.task = asyncio.create_task(session.run())
        return {"ok": True, "status": "running"}

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str, token: str):
        session = get_session(session_id)
        seat = session.seat_by_token(token)
        run = session.live_pairs.get(seat.subject_id)
        if run is None:
            return session.lobby_frame(seat.subject_id)
        return session.frame(run, run.seat_of(seat.subject_id))

    @app.post("/sessions/{session_id}/act")
    async def act(session_id: str, token: str, action: dict):
        session = get_session(session_id)
        seat = session.seat_by_token(token)
        if seat.occupant != "human":
            raise HTTPException(403, "seat is not held by a participant")
        async with session.lock:
            run = session.live_pairs.get(seat.subject_id)
            if run is None:
                raise HTTPException(409, "no period in progress")
            err = session._apply_action(run, seat.subject_id, action,
                                        run.now_ms(), strict=False)
        if err is not None:
            raise HTTPException(422, err)
        return {"ok": True}

    @app.get("/sessions/{session_id}/replay")
    def replay_session(session_id: str):
        session = get_session(session_id)
        if session.status != "finished":
            raise HTTPException(409, "session still in progress")
        path = session.dir / "events.jsonl"
        lines = [ln for ln in path.read_text().splitlines() if ln]
        events = [SessionEvent.from_json(ln) for ln in lines]
        periods, chunk = [], []
        for ev in events:
            if ev.kind == "PeriodStarted" and chunk:
                periods.append(chunk)
                chunk = []
            chunk.append(ev)
        if chunk:
            periods.append(chunk)
        out = []
        for chunk in periods:
            peaks = tuple(chunk[0].payload["peaks"])
            report = finalize_period(chunk, Valuation(peaks))
            out.append({
                "period": chunk[0].payload["period"],
                "peaks": list(peaks),
                "allocation": [int(a) for a in report.allocation],
                "payoffs": [utility(p, a) for p, a in zip(peaks, report.allocation)],
                "is_uniform": report.is_uniform,
                "events": [json.loads(ev.to_json()) for ev in chunk],
            })
        return {"descriptor": session.descriptor(),
                "outcomes": session.outcomes,
                "earnings": {str(k): v for k, v in session.earnings.items()},
                "periods": out}

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str, token: str):
        session = app.state.sessions.get(session_id)
        if session is None:
            await ws.close(code=4404)
            return
        try:
            seat = session.seat_by_token(token)
        except HTTPException:
            await ws.close(code=4403)
            return
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue()
        seat.queues.append(queue)
        run = session.live_pairs.get(seat.subject_id)
        if run is not None:
            await ws.send_json(session.frame(run, run.seat_of(seat.subject_id)))
        else:
            await ws.send_json(session.lobby_frame(seat.subject_id))

        async def pump_out():
            while True:
                await ws.send_json(await queue.get())

        async def pump_in():
            while True:
                raw = await ws.receive_json()
                if raw.get("type") != "action":
                    continue
                async with session.lock:
                    live = session.live_pairs.get(seat.subject_id)
                    if live is None:
                        err = "no period in progress"
                    else:
                        err = session._apply_action(
                            live, seat.subject_id, raw.get("action", {}),
                            live.now_ms(), strict=False)
                if err is not None:
                    await ws.send_json({"type": "rejected", "reason": err,
                                        "action": raw.get("action")})

        out_task = asyncio.create_task(pump_out())
        try:
            await pump_in()
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            out_task.cancel()
            seat.queues.remove(queue)

    return app
