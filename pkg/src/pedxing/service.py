"""Interactive session service.

One websocket connection is one live episode: the server runs the plant and
the selected controller, the client drives the pedestrian.  Two clock modes:

* ``wall``   - the server steps the plant at ``serve.tick_hz`` and streams
               ``tick`` messages; this is the interactive mode.
* ``manual`` - nothing moves until the client sends ``advance``; every step
               is request/response, which makes sessions fully deterministic
               (used by tests and scripted replays).

Every server message carries a per-connection monotone ``seq``.  Each client
message is terminated by a known reply type (``joined``, ``input_ack``,
``advanced``, ``reset_done``, ``controller_selected`` or ``error``), so a
client can always tell when its request has been fully processed.

Controller changes are staged by ``select_controller`` and applied only at
the next ``reset``; a mid-episode swap would inherit a warm start computed
for a different policy.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import asdict

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import Config
from .scenario import JointState, classify_zone, is_ped_passed, is_veh_passed
from .simulate import CONTROLLER_NAMES, make_controller, plant_step
from .trace import Outcome

__all__ = ["PED_INPUT_RANGE", "LiveSession", "build_app", "replay_client"]

# accepted commanded pedestrian speed; outside values are clamped and flagged
PED_INPUT_RANGE = (-0.5, 2.0)


class HumanPedestrian:
    """Pedestrian driven by client speed commands.

    The raw intention latches: walking toward the road raises it to 1,
    walking away drops it to 0, standing still keeps the last value.  A
    pedestrian waiting at the curb therefore keeps signalling intent, which
    is what the controller's standstill discount is there to resolve.
    """

    def __init__(self) -> None:
        self.target = 0.0
        self.intention = 0.0
        self.clamped = False

    def command(self, speed: float) -> float:
        lo, hi = PED_INPUT_RANGE
        applied = min(max(float(speed), lo), hi)
        self.clamped = applied != float(speed)
        self.target = applied
        if applied > 0.05:
            self.intention = 1.0
        elif applied < -0.05:
            self.intention = 0.0
        return applied

    def act(self) -> tuple[float, float]:
        return self.target, self.intention


class LiveSession:
    """Incremental episode: the step logic of a batch run, one tick at a time."""

    def __init__(self, config: Config, controller_name: str, seed: int,
                 slot_budget: float | None = None):
        if controller_name not in CONTROLLER_NAMES:
            raise ValueError(f"unknown controller {controller_name!r}")
        self.config = config
        self.controller_name = controller_name
        self.seed = seed
        self.slot_budget = slot_budget
        self.controller = make_controller(controller_name, config.controller,
                                          config.geometry, config.metrics)
        self.ped = HumanPedestrian()
        self.every = config.sim.controller_every(config.controller.dt)
        self.n_ticks = int(round(config.sim.t_max / config.sim.dt_sim))
        sim = config.sim
        self.state = JointState(t=0.0, x_veh=sim.veh_start_x, v_veh=sim.veh_start_speed,
                                y_ped=sim.ped_start_y, v_ped=0.0)
        self.i = 0
        self.u_hold = 0.0
        self.decision = None
        self.done = False
        self.outcome: str | None = None
        self.t_end: float | None = None

    def step(self) -> dict:
        """Advance one plant tick; returns the tick message body.

        Mirrors the batch episode loop: emit the current state, check for
        resolution, then integrate.  After the episode resolves the session
        idles and step() keeps returning the terminal tick.
        """
        if self.done:
            return self._tick_body(overrun=False)

        target, intention = self.ped.act()
        overrun = False
        if self.i % self.every == 0:
            started = time.perf_counter()
            decision = self.controller.decide(self.state, intention)
            elapsed = time.perf_counter() - started
            self.decision = decision
            if self.slot_budget is not None and elapsed > self.slot_budget:
                overrun = True          # missed the slot: keep the old command
            else:
                self.u_hold = decision.u

        body = self._tick_body(overrun=overrun, intention_raw=intention)

        geom = self.config.geometry
        if is_ped_passed(self.state, geom):
            self.done, self.outcome, self.t_end = True, Outcome.PED_FIRST, self.state.t
        elif is_veh_passed(self.state, geom):
            self.done, self.outcome, self.t_end = True, Outcome.VEH_FIRST, self.state.t
        elif self.i >= self.n_ticks:
            self.done, self.outcome, self.t_end = True, Outcome.TIMEOUT, self.state.t
        else:
            self.state = plant_step(self.state, self.u_hold, target,
                                    self.config.sim.dt_sim, self.config.sim,
                                    self.config.controller)
            self.i += 1
        return body

    def _tick_body(self, overrun: bool, intention_raw: float | None = None) -> dict:
        s = self.state
        if intention_raw is None:
            intention_raw = self.ped.intention
        eff = self.decision.intention_eff if self.decision is not None else intention_raw
        return {
            "type": "tick",
            "t": s.t, "x_veh": s.x_veh, "v_veh": s.v_veh,
            "y_ped": s.y_ped, "v_ped": s.v_ped,
            "u_cmd": self.u_hold,
            "intention_raw": float(intention_raw),
            "intention_eff": float(eff),
            "zone": classify_zone(s.y_ped, self.config.geometry).value,
            "clamped": self.ped.clamped,
            "overrun": overrun,
        }

    def end_body(self) -> dict:
        return {"type": "episode_end", "outcome": self.outcome, "t_end": self.t_end}


def _config_summary(config: Config) -> dict:
    g = config.geometry
    return {
        "config_hash": config.hash,
        "controllers": list(CONTROLLER_NAMES),
        "ped_input_range": list(PED_INPUT_RANGE),
        "geometry": asdict(g),
        "sim": {"dt_sim": config.sim.dt_sim, "t_max": config.sim.t_max,
                "veh_start_x": config.sim.veh_start_x,
                "ped_start_y": config.sim.ped_start_y},
        "controller_info": {"dt": config.controller.dt,
                            "n_horizon": config.controller.n_horizon,
                            "v_veh_max": config.controller.v_veh_max,
                            "v_veh_ref": config.controller.v_veh_ref},
        "serve": {"tick_hz": config.serve.tick_hz,
                  "controller": config.serve.controller},
    }


class _Connection:
    def __init__(self, ws: WebSocket, config: Config):
        self.ws = ws
        self.config = config
        self.seq = 0
        self.session: LiveSession | None = None
        self.mode = "wall"
        self.pending_controller: str | None = None
        self.lock = asyncio.Lock()
        self.pump_task: asyncio.Task | None = None
        self.end_sent = False

    async def send(self, body: dict) -> None:
        body = dict(body)
        body["seq"] = self.seq
        self.seq += 1
        await self.ws.send_text(json.dumps(body, sort_keys=True))

    async def error(self, message: str) -> None:
        await self.send({"type": "error", "message": message})

    async def step_and_send(self) -> None:
        session = self.session
        tick = await asyncio.to_thread(session.step)
        await self.send(tick)
        if session.done and not self.end_sent:
            self.end_sent = True
            await self.send(session.end_body())

    async def handle(self, msg: dict) -> None:
        mtype = msg.get("type")
        if self.session is None and mtype != "join":
            await self.error("join first")
            return

        if mtype == "join":
            if self.session is not None:
                await self.error("already joined")
                return
            mode = msg.get("mode", "wall")
            if mode not in ("wall", "manual"):
                await self.error(f"unknown mode {mode!r}")
                return
            controller = msg.get("controller", self.config.serve.controller)
            seed = int(msg.get("seed", 0))
            budget = msg.get("slot_budget_ms")
            if budget is None and mode == "wall":
                budget = 1000.0 / self.config.serve.tick_hz
            try:
                session = LiveSession(self.config, controller, seed,
                                      slot_budget=None if budget is None
                                      else float(budget) / 1000.0)
            except ValueError as exc:
                await self.error(str(exc))
                return
            self.session, self.mode, self.end_sent = session, mode, False
            await self.send({"type": "joined", "mode": mode,
                             "controller": controller, "seed": seed,
                             **_config_summary(self.config)})
            if mode == "wall":
                self.pump_task = asyncio.create_task(self.pump())

        elif mtype == "ped_input":
            speed = msg.get("speed")
            if not isinstance(speed, (int, float)) or isinstance(speed, bool):
                await self.error("ped_input needs a numeric 'speed'")
                return
            async with self.lock:
                applied = self.session.ped.command(float(speed))
                clamped = self.session.ped.clamped
            await self.send({"type": "input_ack", "applied": applied,
                             "clamped": clamped})

        elif mtype == "advance":
            if self.mode != "manual":
                await self.error("advance is only valid in manual mode")
                return
            ticks = msg.get("ticks", 1)
            if not isinstance(ticks, int) or isinstance(ticks, bool) \
                    or not 1 <= ticks <= 100_000:
                await self.error("advance needs integer 'ticks' in [1, 100000]")
                return
            sent = 0
            async with self.lock:
                for _ in range(ticks):
                    if self.session.done:
                        break
                    await self.step_and_send()
                    sent += 1
            await self.send({"type": "advanced", "ticks_sent": sent,
                             "done": self.session.done})

        elif mtype == "select_controller":
            name = msg.get("name")
            if name not in CONTROLLER_NAMES:
                await self.error(f"unknown controller {name!r}; expected one of "
                                 f"{list(CONTROLLER_NAMES)}")
                return
            self.pending_controller = name
            await self.send({"type": "controller_selected", "name": name,
                             "applies": "next_reset"})

        elif mtype == "reset":
            controller = msg.get("controller") or self.pending_controller \
                or self.session.controller_name
            seed = int(msg.get("seed", self.session.seed))
            async with self.lock:
                try:
                    self.session = LiveSession(self.config, controller, seed,
                                               slot_budget=self.session.slot_budget)
                except ValueError as exc:
                    await self.error(str(exc))
                    return
                self.pending_controller = None
                self.end_sent = False
            await self.send({"type": "reset_done", "controller": controller,
                             "seed": seed})

        else:
            await self.error(f"unknown message type {mtype!r}")

    async def pump(self) -> None:
        period = 1.0 / self.config.serve.tick_hz
        next_deadline = time.perf_counter() + period
        try:
            while True:
                async with self.lock:
                    if not self.session.done:
                        await self.step_and_send()
                delay = next_deadline - time.perf_counter()
                if delay > 0:
                    await asyncio.sleep(delay)
                    next_deadline += period
                else:
                    # fell behind; restart the cadence instead of bursting
                    next_deadline = time.perf_counter() + period
                    await asyncio.sleep(0)
        except (WebSocketDisconnect, RuntimeError, asyncio.CancelledError):
            return

    async def run(self) -> None:
        await self.ws.accept()
        try:
            while True:
                raw = await self.ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await self.error("invalid JSON")
                    continue
                if not isinstance(msg, dict):
                    await self.error("expected a JSON object")
                    continue
                await self.handle(msg)
        except WebSocketDisconnect:
            pass
        finally:
            if self.pump_task is not None:
                self.pump_task.cancel()


def build_app(config: Config, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="pedxing session service")

    @app.get("/config")
    def get_config() -> dict:
        return _config_summary(config)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await _Connection(ws, config).run()

    static_dir = static_dir or config.serve.static_dir
    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def replay_client(config: Config, script: list[dict]) -> list[dict]:
    """Play a scripted message list against an in-process service.

    Connects over the ASGI test transport, sends each message and collects
    replies until that message's terminating type, so the returned list is
    deterministic for manual-mode scripts.
    """
    from fastapi.testclient import TestClient

    terminator = {"join": "joined", "ped_input": "input_ack", "advance": "advanced",
                  "select_controller": "controller_selected", "reset": "reset_done"}
    app = build_app(config)
    received: list[dict] = []
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            for msg in script:
                ws.send_text(json.dumps(msg))
                expect = terminator.get(msg.get("type"), "error")
                while True:
                    reply = json.loads(ws.receive_text())
                    received.append(reply)
                    if reply["type"] in (expect, "error"):
                        break
    return received
