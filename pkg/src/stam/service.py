"""Realtime teleoperation/visualization service.

A single simulator instance advances continuously on the server's event
loop. Browser (or test) clients speak JSON over one WebSocket endpoint:

    {"kind": <str>, "seq": <int>, "payload": {...}}

Exactly one session may hold the driver role; everyone else observes. State
snapshots go out as ``tick`` messages at a decimated rate. ``seq`` is
strictly increasing per direction within a session; protocol violations are
answered with an ``error`` message and the session stays open.
"""

from __future__ import annotations

import asyncio
import json
import math
from contextlib import asynccontextmanager
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from fastapi import FastAPI, WebSocket
from starlette.staticfiles import StaticFiles
from starlette.websockets import WebSocketDisconnect

from .affordance import AffordanceRegistry, Task, follow_evaluator
from .dataset import (
    DemoStore,
    append_demo,
    load_records,
    relative_samples,
    save_records,
)
from .errors import StamError
from .grid import OccupancyGrid, format_map, normalize_costmap
from .planner import gainmap
from .regression import density_map, fit_relative_model
from .sim import (
    HOLD,
    Cmd,
    DemoRecorder,
    ExpertFollower,
    FollowController,
    SimConfig,
    TargetWanderer,
    _place_pair,
    make_world,
    record_tick,
    step,
)

import numpy as np

CLIENT_KINDS = ("hello", "claim_driver", "cmd", "record", "fit", "heatmap", "set_policy")
POLICIES = ("teleop", "expert", "follow")
FOLLOW_TASK = "follow"

_JSON_SEP = (",", ":")


@dataclass(frozen=True)
class ServeConfig:
    grid: OccupancyGrid
    seed: int = 0
    sim: SimConfig = dc_field(default_factory=SimConfig)
    records_dir: str | None = "records"
    snapshot_every: int = 2
    realtime_factor: float = 1.0
    k_max: int = 8
    ui_dir: str | None = None


class _Reject(Exception):
    """A per-message protocol violation; answered with an error reply."""


class Session:
    _next_id = 0

    def __init__(self, ws: WebSocket) -> None:
        Session._next_id += 1
        self.id = Session._next_id
        self.ws = ws
        self.queue: asyncio.Queue[tuple[str, dict]] = asyncio.Queue(maxsize=64)
        self.last_in: int | None = None
        self.seq_out = 0

    async def send(self, kind: str, payload: dict) -> None:
        await self.queue.put((kind, payload))

    def send_tick(self, payload: dict) -> None:
        """Best-effort tick delivery: a slow consumer just misses snapshots."""
        try:
            self.queue.put_nowait(("tick", payload))
        except asyncio.QueueFull:
            pass

    async def writer(self) -> None:
        while True:
            kind, payload = await self.queue.get()
            self.seq_out += 1
            await self.ws.send_text(
                json.dumps(
                    {"kind": kind, "seq": self.seq_out, "payload": payload},
                    separators=_JSON_SEP,
                )
            )


def _pose_payload(state) -> dict:
    return {
        "x": state.pose.x,
        "y": state.pose.y,
        "alpha": state.pose.alpha,
        "v": state.v,
        "omega": state.omega,
    }


def _require(payload: dict, key: str):
    if key not in payload:
        raise _Reject(f"payload missing {key!r}")
    return payload[key]


def _require_number(payload: dict, key: str) -> float:
    value = _require(payload, key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _Reject(f"{key!r} must be a number")
    if not math.isfinite(value):
        raise _Reject(f"{key!r} must be finite")
    return float(value)


class TeleopService:
    """Owns the simulator, demo store, model registry and client sessions."""

    def __init__(self, config: ServeConfig) -> None:
        self.config = config
        place_seed, wander_seed, expert_seed = np.random.SeedSequence(config.seed).spawn(3)
        target, follower = _place_pair(
            config.grid,
            config.sim,
            np.random.default_rng(place_seed),
            (config.sim.d_min, config.sim.d_max),
        )
        self.world = make_world(config.grid, target, follower, config.sim, config.seed)
        self.wander = TargetWanderer(self.world, wander_seed)
        self.expert = ExpertFollower(
            expert_seed, config.sim.d_min, config.sim.d_max, config.sim.expert_jitter
        )
        self.registry = AffordanceRegistry()
        self.store = DemoStore()
        self.recorder = DemoRecorder()
        self.policy = "teleop"
        self.follow_controller: FollowController | None = None
        self.sessions: dict[int, Session] = {}
        self.driver: Session | None = None
        self.driver_cmd: Cmd = HOLD
        self.tick_index = 0
        self._fit_lock = asyncio.Lock()
        self._costmap = normalize_costmap(config.grid, config.sim.inflation_radius)
        if config.records_dir:
            self._load_existing_demos(Path(config.records_dir))

    # -- startup -----------------------------------------------------------

    def _load_existing_demos(self, records_dir: Path) -> None:
        if not records_dir.is_dir():
            return
        for path in sorted(records_dir.glob("*.jsonl")):
            records = load_records(path)
            if records:
                append_demo(self.store, records, records[0].demo_id)

    def preload_signature(self, signature) -> None:
        self.registry.register(
            Task(FOLLOW_TASK, {"target": "target"}),
            follow_evaluator,
            signature.params,
            signature.meta,
        )

    # -- sim loop ----------------------------------------------------------

    def advance(self) -> None:
        if self.policy == "expert":
            fcmd = self.expert(self.world)
        elif self.policy == "follow" and self.follow_controller is not None:
            fcmd = self.follow_controller(self.world)
        else:
            fcmd = self.driver_cmd if self.driver is not None else HOLD
        self.world = step(self.world, self.wander(self.world), fcmd)
        record_tick(self.world, self.recorder)
        self.tick_index += 1

    def tick_payload(self) -> dict:
        return {
            "t": self.world.t,
            "target": _pose_payload(self.world.target),
            "follower": _pose_payload(self.world.follower),
            "collision": self.world.follower.collided,
            "recording": {
                "active": self.recorder.active,
                "demo_id": self.recorder.demo_id if self.recorder.active else None,
            },
        }

    def broadcast_tick(self) -> None:
        payload = self.tick_payload()
        for session in self.sessions.values():
            session.send_tick(payload)

    async def loop(self) -> None:
        dt = self.config.sim.dt
        while True:
            self.advance()
            if self.tick_index % self.config.snapshot_every == 0:
                self.broadcast_tick()
            if self.config.realtime_factor > 0:
                await asyncio.sleep(dt / self.config.realtime_factor)
            else:
                await asyncio.sleep(0)

    # -- session lifecycle ---------------------------------------------------

    def attach(self, ws: WebSocket) -> Session:
        session = Session(ws)
        self.sessions[session.id] = session
        return session

    def detach(self, session: Session) -> None:
        self.sessions.pop(session.id, None)
        if self.driver is session:
            self.driver = None
            self.driver_cmd = HOLD
            if self.recorder.active:
                # the recording driver vanished: drop the partial demo
                self.recorder.stop()

    # -- message handling ----------------------------------------------------

    async def handle_text(self, session: Session, raw: str) -> None:
        seq = None
        try:
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError as e:
                raise _Reject(f"invalid JSON: {e}") from e
            if not isinstance(msg, dict):
                raise _Reject("message must be a JSON object")
            kind = msg.get("kind")
            if not isinstance(kind, str):
                raise _Reject("message needs a string 'kind'")
            raw_seq = msg.get("seq")
            if isinstance(raw_seq, bool) or not isinstance(raw_seq, int):
                raise _Reject("message needs an integer 'seq'")
            seq = raw_seq
            if session.last_in is not None and seq <= session.last_in:
                raise _Reject(
                    f"seq must increase (got {seq} after {session.last_in})"
                )
            session.last_in = seq
            payload = msg.get("payload", {})
            if not isinstance(payload, dict):
                raise _Reject("'payload' must be an object")
            if kind not in CLIENT_KINDS:
                raise _Reject(f"unknown kind {kind!r}")
            handler = getattr(self, f"_handle_{kind}")
            await handler(session, payload)
        except _Reject as r:
            await session.send("error", {"message": str(r), "seq": seq})

    def _require_driver(self, session: Session) -> None:
        if self.driver is not session:
            raise _Reject("requires the driver role")

    async def _handle_hello(self, session: Session, payload: dict) -> None:
        grid = self.config.grid
        version = 0
        if FOLLOW_TASK in self.registry:
            version = self.registry.signature(FOLLOW_TASK).version
        await session.send(
            "hello",
            {
                "map": {
                    "width": grid.width,
                    "height": grid.height,
                    "resolution": grid.resolution,
                    "origin": {
                        "x": grid.origin.x,
                        "y": grid.origin.y,
                        "alpha": grid.origin.alpha,
                    },
                    "text": format_map(grid),
                },
                "limits": {
                    "v_max": self.config.sim.v_max,
                    "omega_max": self.config.sim.omega_max,
                },
                "dt": self.config.sim.dt,
                "band": {"d_min": self.config.sim.d_min, "d_max": self.config.sim.d_max},
                "policy": self.policy,
                "role": "driver" if self.driver is session else "observer",
                "demo_ids": self.store.demo_ids(),
                "model_version": version,
            },
        )

    async def _handle_claim_driver(self, session: Session, payload: dict) -> None:
        if self.driver is None or self.driver is session:
            self.driver = session
            await session.send("claim_driver", {"granted": True, "role": "driver"})
        else:
            await session.send(
                "claim_driver",
                {"granted": False, "role": "observer", "reason": "driver role is taken"},
            )

    async def _handle_cmd(self, session: Session, payload: dict) -> None:
        self._require_driver(session)
        v = _require_number(payload, "v")
        omega = _require_number(payload, "omega")
        self.driver_cmd = Cmd(v, omega)

    async def _handle_record(self, session: Session, payload: dict) -> None:
        self._require_driver(session)
        active = _require(payload, "active")
        if not isinstance(active, bool):
            raise _Reject("'active' must be a boolean")
        if active:
            if self.recorder.active:
                raise _Reject("already recording")
            demo_id = _require(payload, "demo_id")
            if isinstance(demo_id, bool) or not isinstance(demo_id, int) or demo_id < 0:
                raise _Reject("'demo_id' must be a non-negative integer")
            if demo_id in self.store:
                raise _Reject(f"demo {demo_id} already exists")
            source = "teleop" if self.policy == "teleop" else "scripted"
            self.recorder.start(demo_id, source=source)
            await session.send("record", {"active": True, "demo_id": demo_id, "count": 0})
            return
        if not self.recorder.active:
            raise _Reject("not recording")
        demo_id = self.recorder.demo_id
        records = self.recorder.stop()
        if records:
            append_demo(self.store, records, demo_id)
            if self.config.records_dir:
                directory = Path(self.config.records_dir)
                directory.mkdir(parents=True, exist_ok=True)
                save_records(records, directory / f"demo_{demo_id:03d}.jsonl")
        await session.send(
            "record", {"active": False, "demo_id": demo_id, "count": len(records)}
        )

    async def _handle_fit(self, session: Session, payload: dict) -> None:
        self._require_driver(session)
        ids = _require(payload, "demo_ids")
        if not isinstance(ids, list) or not ids:
            raise _Reject("'demo_ids' must be a non-empty list")
        for i in ids:
            if isinstance(i, bool) or not isinstance(i, int):
                raise _Reject("'demo_ids' must hold integers")
            if i not in self.store:
                raise _Reject(f"unknown demo {i}")
        async with self._fit_lock:
            records = self.store.records(ids)
            samples = relative_samples(records)
            try:
                model, scores = await asyncio.to_thread(
                    fit_relative_model, samples, self.config.k_max, self.config.seed
                )
            except StamError as e:
                raise _Reject(f"fit failed: {e}") from e
            meta = {"samples": len(records), "demo_ids": list(ids), "seed": self.config.seed}
            if FOLLOW_TASK in self.registry:
                sig = self.registry.update(FOLLOW_TASK, model, meta)
            else:
                sig = self.registry.register(
                    Task(FOLLOW_TASK, {"target": "target"}), follow_evaluator, model, meta
                )
            await session.send(
                "fit",
                {
                    "version": sig.version,
                    "components": model.k,
                    "samples": len(records),
                    "demo_ids": list(ids),
                    "bic": [float(s) for s in scores],
                },
            )

    async def _handle_heatmap(self, session: Session, payload: dict) -> None:
        what = _require(payload, "what")
        if what not in ("affordance", "gainmap", "cost"):
            raise _Reject(f"unknown heatmap {what!r}")
        lam = self.config.sim.lam
        if "lambda" in payload:
            lam = _require_number(payload, "lambda")
            if not 0.0 <= lam <= 1.0:
                raise _Reject("'lambda' must be in [0, 1]")
        if what == "cost":
            field = self._costmap
        else:
            if FOLLOW_TASK not in self.registry:
                raise _Reject("no model fitted yet")
            sig = self.registry.signature(FOLLOW_TASK)
            likelihood = density_map(
                sig.params, self.world.target.pose, self.config.grid
            )
            field = likelihood if what == "affordance" else gainmap(self._costmap, likelihood, lam)
        await session.send(
            "heatmap",
            {
                "what": what,
                "lambda": lam,
                "width": field.width,
                "height": field.height,
                "resolution": field.resolution,
                "origin": {"x": field.origin.x, "y": field.origin.y, "alpha": field.origin.alpha},
                "values": [float(v) for v in field.values.ravel()],
                "max": float(field.values.max()),
            },
        )

    async def _handle_set_policy(self, session: Session, payload: dict) -> None:
        self._require_driver(session)
        policy = _require(payload, "policy")
        if policy not in POLICIES:
            raise _Reject(f"unknown policy {policy!r}")
        if policy == "follow":
            if FOLLOW_TASK not in self.registry:
                raise _Reject("no model fitted yet")
            self.follow_controller = FollowController(self.registry)
        self.policy = policy
        self.driver_cmd = HOLD
        await session.send("set_policy", {"policy": policy})


def build_app(config: ServeConfig) -> FastAPI:
    service = TeleopService(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(service.loop())
        try:
            yield
        finally:
            task.cancel()
            try:
                await task
            except asyncio.CancelledError:
                pass

    app = FastAPI(lifespan=lifespan)
    app.state.service = service

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        session = service.attach(ws)
        writer = asyncio.create_task(session.writer())
        try:
            while True:
                message = await ws.receive()
                if message["type"] == "websocket.disconnect":
                    break
                text = message.get("text")
                if text is None:
                    await session.send("error", {"message": "binary frames are not supported", "seq": None})
                    continue
                await service.handle_text(session, text)
        except WebSocketDisconnect:
            pass
        finally:
            writer.cancel()
            service.detach(session)

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
