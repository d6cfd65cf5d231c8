"""FastAPI app exposing the simulator: /healthz, batch /run and
/validate endpoints, and the /sim WebSocket for live steering.

One asyncio task owns the simulation state; websocket handlers talk to
it only through queues. Snapshots fan out latest-wins per client (a
slow client drops frames, never stalls the loop), with the per-client
drop count stamped on each delivered snapshot. Client commands apply at
tick boundaries in arrival order; a command may carry `apply_at_tick`
to pin the tick deterministically.
"""

from __future__ import annotations

import asyncio
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, ConfigDict

from .. import engine as engine_mod
from ..engine import Engine, TickRow
from ..errors import ConfigError, DecodeError, DomainError, WornsimError
from ..geometry import Transform
from ..metrics import compute_metrics
from ..scenario import Scenario, validate_scenario
from . import models as wire


def _wire_tf(t: Transform) -> wire.WireTransform:
    return wire.WireTransform.model_validate(t.to_dict())


def snapshot_from_row(row: TickRow, skeleton: dict, dropped: int = 0) -> wire.SnapshotMessage:
    return wire.SnapshotMessage(
        tick=row.tick,
        timestamp=row.t,
        poses=wire.SnapshotPoses(
            E_H=_wire_tf(row.ehw),
            E_AR_raw=_wire_tf(row.ear),
            E_AR_filtered=_wire_tf(row.filt),
            E_R=_wire_tf(row.erw),
        ),
        robot_q=[float(v) for v in row.robot_q],
        errors=wire.SnapshotErrors(d_trans=row.err_trans, d_rot=row.err_rot),
        flags=wire.SnapshotFlags(attached=row.attached, gripper=row.gripper,
                                 unreachable=row.unreachable, singular=row.singular),
        skeleton=wire.Skeleton.model_validate(skeleton),
        dropped=dropped,
    )


@dataclass(eq=False)
class _Client:
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(maxsize=1))
    outbox: asyncio.Queue = field(default_factory=asyncio.Queue)
    dropped: int = 0

    def offer_snapshot(self, snap: wire.SnapshotMessage):
        if self.queue.full():
            try:
                self.queue.get_nowait()
                self.dropped += 1
            except asyncio.QueueEmpty:
                pass
        self.queue.put_nowait(snap)


class SimService:
    def __init__(self, scenario: Scenario, publish_rate: float, pace: str,
                 start_paused: bool):
        self.scenario = scenario
        self.engine = Engine(scenario)
        self.publish_every = max(1, int(round(1.0 / (publish_rate * scenario.dt))))
        self.pace = pace
        self.paused = start_paused
        self.inbox: asyncio.Queue = asyncio.Queue()
        self.clients: set[_Client] = set()
        self.tick = -1

    def _schedule(self, client: _Client, msg) -> None:
        target = getattr(msg, "apply_at_tick", None)
        tick = self.engine.tick if target is None else max(target, self.engine.tick)
        if isinstance(msg, wire.AuxTwistMessage):
            if len(msg.twist) != 6:
                raise DecodeError("twist", "needs 6 entries")
            self.engine.schedule(tick, ("aux", tuple(msg.twist), msg.gripper))
        elif isinstance(msg, wire.AttachMessage):
            self.engine.schedule(tick, ("attach", msg.frame, msg.mode))
        elif isinstance(msg, wire.DetachMessage):
            self.engine.schedule(tick, ("detach",))
        elif isinstance(msg, wire.GripperMessage):
            self.engine.schedule(tick, ("gripper", msg.on))
        elif isinstance(msg, wire.SetConfigMessage):
            self.engine.schedule(tick, ("set_config", dict(msg.servo)))
        else:
            raise DecodeError("type", "unhandled message type")
        client.outbox.put_nowait(wire.AckMessage(command=msg.type, tick=tick))

    def handle_message(self, client: _Client, text: str):
        try:
            msg = wire.decode_client(text)
        except DecodeError as e:
            client.outbox.put_nowait(wire.ErrorMessage(detail=str(e)))
            return
        if isinstance(msg, wire.PauseMessage):
            self.paused = True
            client.outbox.put_nowait(wire.AckMessage(command="pause", tick=self.engine.tick))
        elif isinstance(msg, wire.ResumeMessage):
            self.paused = False
            client.outbox.put_nowait(wire.AckMessage(command="resume", tick=self.engine.tick))
        else:
            try:
                self._schedule(client, msg)
            except (DecodeError, DomainError, ConfigError) as e:
                client.outbox.put_nowait(wire.ErrorMessage(detail=str(e)))

    async def loop(self):
        dt = self.scenario.dt
        deadline = time.monotonic()
        while True:
            while not self.inbox.empty():
                client, text = self.inbox.get_nowait()
                self.handle_message(client, text)
            if not self.paused:
                try:
                    row = self.engine.step()
                except WornsimError:
                    self.paused = True
                    continue
                self.tick = row.tick
                if row.tick % self.publish_every == 0:
                    snap = snapshot_from_row(row, self.engine.skeleton())
                    for client in list(self.clients):
                        client.offer_snapshot(snap)
            if self.pace == "real" and not self.paused:
                deadline += dt
                delay = deadline - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    deadline = time.monotonic()
                    await asyncio.sleep(0)
            else:
                await asyncio.sleep(0.02 if self.paused else 0)


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: dict


class RunResponse(BaseModel):
    metrics: dict
    ticks: int


class ValidateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: dict


class ValidateResponse(BaseModel):
    valid: bool
    field: str | None = None
    error: str | None = None


def create_app(scenario: Scenario, publish_rate: float = 30.0, pace: str = "real",
               start_paused: bool = False) -> FastAPI:
    service = SimService(scenario, publish_rate, pace, start_paused)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(service.loop())
        try:
            yield
        finally:
            task.cancel()

    app = FastAPI(title="wornsim bridge", lifespan=lifespan)
    app.state.service = service

    @app.get("/healthz")
    def healthz():
        return {"status": "paused" if service.paused else "ok", "tick": service.tick}

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest):
        try:
            validate_scenario(req.scenario)
        except ConfigError as e:
            return ValidateResponse(valid=False, field=e.field, error=str(e))
        return ValidateResponse(valid=True)

    @app.post("/run", response_model=RunResponse)
    async def run_batch(req: RunRequest):
        sc = validate_scenario(req.scenario)
        loop = asyncio.get_running_loop()
        log = await loop.run_in_executor(None, engine_mod.run, sc)
        return RunResponse(metrics=compute_metrics(log).to_dict(), ticks=len(log))

    @app.websocket("/sim")
    async def sim_socket(ws: WebSocket):
        await ws.accept()
        client = _Client()
        service.clients.add(client)

        async def sender():
            while True:
                try:
                    msg = client.outbox.get_nowait()
                except asyncio.QueueEmpty:
                    try:
                        msg = client.queue.get_nowait()
                    except asyncio.QueueEmpty:
                        await asyncio.sleep(0.001)
                        continue
                if isinstance(msg, wire.SnapshotMessage) and client.dropped:
                    msg = msg.model_copy(update={"dropped": client.dropped})
                await ws.send_text(wire.encode(msg))

        send_task = asyncio.create_task(sender())
        try:
            while True:
                text = await ws.receive_text()
                service.inbox.put_nowait((client, text))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            service.clients.discard(client)

    return app
