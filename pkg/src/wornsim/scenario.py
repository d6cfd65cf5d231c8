"""Scenario documents: JSON schema (version 1), validation with dotted
field paths, and dotted-path overrides.

The same validator backs `wornsim validate`, `wornsim run` and the
service's scenario intake, so the set of accepted documents is identical
everywhere.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import geometry as geo
from . import kinematics as kin
from .errors import ConfigError, DomainError
from .virtual_limb import PRESERVE_LINKAGE, PRESERVE_WORLD

SCHEMA_VERSION = 1

IMU_ATTACHABLE = ("trunk", "upper_arm", "forearm", "hand", "head")


class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TransformDoc(_Doc):
    q: list[float] = Field(default_factory=lambda: [1.0, 0.0, 0.0, 0.0])
    t: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])

    def build(self, from_frame: str = "", to_frame: str = "") -> geo.Transform:
        return geo.make_transform(tuple(self.q), tuple(self.t), from_frame, to_frame)


class SinusoidDoc(_Doc):
    joint: int
    amplitude: float
    frequency: float
    phase: float = 0.0


class WaypointDoc(_Doc):
    t: float
    q: list[float]


class TrajectoryDoc(_Doc):
    sinusoids: list[SinusoidDoc] = Field(default_factory=list)
    waypoints: list[WaypointDoc] = Field(default_factory=list)


class BodyDoc(_Doc):
    trunk: float = 0.5
    upper_arm: float = 0.3
    forearm: float = 0.25
    neck: float = 0.1
    shoulder_offset: float = 0.2


class HumanDoc(_Doc):
    root_pose: TransformDoc = Field(default_factory=TransformDoc)
    initial_q: list[float] = Field(default_factory=lambda: [0.0] * 9)
    body: BodyDoc = Field(default_factory=BodyDoc)
    trajectory: TrajectoryDoc = Field(default_factory=TrajectoryDoc)


class AttachmentDoc(_Doc):
    frame: str = "hand"
    mode: str = PRESERVE_WORLD


class JointDoc(_Doc):
    name: str
    kind: str = "revolute"
    axis: list[float]
    limits: list[float]
    offset: TransformDoc = Field(default_factory=TransformDoc)
    frame: str = ""


class ChainDoc(_Doc):
    base_frame: str
    tip_frame: str
    joints: list[JointDoc]
    tip_offset: TransformDoc = Field(default_factory=TransformDoc)

    def build(self) -> kin.KinematicChain:
        joints = tuple(
            kin.JointSpec(j.name, j.kind, tuple(j.axis), (j.limits[0], j.limits[1]),
                          j.offset.build(), j.frame)
            for j in self.joints
        )
        return kin.KinematicChain(self.base_frame, joints, self.tip_frame,
                                  self.tip_offset.build())


class LinkageDoc(_Doc):
    type: str = "fixed"
    offset: TransformDoc = Field(default_factory=lambda: TransformDoc(t=[0.4, 0.0, 0.0]))
    chain: Optional[ChainDoc] = None
    initial_q: Optional[list[float]] = None
    mount: TransformDoc = Field(default_factory=TransformDoc)


class AuxCommandDoc(_Doc):
    t: float
    twist: list[float] = Field(default_factory=lambda: [0.0] * 6)
    gripper: bool = False


class EventDoc(_Doc):
    t: float
    action: str
    frame: Optional[str] = None
    mode: Optional[str] = None


class ServoDoc(_Doc):
    control_period: float = 0.01
    time_constant: float = 0.15
    dls_damping: float = 0.05
    max_joint_velocity: float = 1.0
    position_gain: float = 8.0
    convergence_tol: list[float] = Field(default_factory=lambda: [1e-4, 1e-3])


class SensingDoc(_Doc):
    backend: str = "mocap"
    sigma_t: float = 0.0
    sigma_r: float = 0.0
    drift_rate: float = 0.0
    seed: Optional[int] = None


class TwistCapsDoc(_Doc):
    linear: float = 0.5
    angular: float = 1.5


class RobotDoc(_Doc):
    base_pose: TransformDoc = Field(default_factory=lambda: TransformDoc(t=[0.7, 0.0, 0.0]))
    initial_q: Optional[list[float]] = None
    chain: Optional[ChainDoc] = None


class Scenario(_Doc):
    version: int = SCHEMA_VERSION
    name: str = ""
    duration: float
    dt: float
    seed: int = 0
    display: bool = False
    human: HumanDoc = Field(default_factory=HumanDoc)
    attachment: AttachmentDoc = Field(default_factory=AttachmentDoc)
    linkage: LinkageDoc = Field(default_factory=LinkageDoc)
    aux_commands: list[AuxCommandDoc] = Field(default_factory=list)
    events: list[EventDoc] = Field(default_factory=list)
    twist_caps: TwistCapsDoc = Field(default_factory=TwistCapsDoc)
    servo: ServoDoc = Field(default_factory=ServoDoc)
    sensing: SensingDoc = Field(default_factory=SensingDoc)
    robot: RobotDoc = Field(default_factory=RobotDoc)

    @property
    def sensing_seed(self) -> int:
        return self.seed if self.sensing.seed is None else self.sensing.seed


def _fail(field: str, message: str):
    raise ConfigError(field, message)


def _check_transform(doc: TransformDoc, path: str):
    if len(doc.q) != 4:
        _fail(path + ".q", "quaternion needs 4 entries [w, x, y, z]")
    if len(doc.t) != 3:
        _fail(path + ".t", "translation needs 3 entries")
    if math.sqrt(sum(v * v for v in doc.q)) < 1e-9:
        _fail(path + ".q", "quaternion norm is zero")


def _check_chain(doc: ChainDoc, path: str) -> kin.KinematicChain:
    for i, j in enumerate(doc.joints):
        jp = f"{path}.joints.{i}"
        if j.kind not in (kin.REVOLUTE, kin.PRISMATIC):
            _fail(jp + ".kind", f"unknown joint kind {j.kind!r}")
        if len(j.axis) != 3:
            _fail(jp + ".axis", "axis needs 3 entries")
        if len(j.limits) != 2:
            _fail(jp + ".limits", "limits need 2 entries [lo, hi]")
        _check_transform(j.offset, jp + ".offset")
    _check_transform(doc.tip_offset, path + ".tip_offset")
    try:
        return doc.build()
    except DomainError as e:
        _fail(path, str(e))


def validate_scenario(doc: dict) -> Scenario:
    """Validate a raw scenario document; raises ConfigError naming the
    offending field with a dotted path."""
    try:
        sc = Scenario.model_validate(doc)
    except ValidationError as e:
        err = e.errors()[0]
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigError(path, err["msg"]) from None

    if sc.version != SCHEMA_VERSION:
        _fail("version", f"unsupported schema version {sc.version}, expected {SCHEMA_VERSION}")
    if sc.duration <= 0.0:
        _fail("duration", "must be positive")
    if sc.dt <= 0.0:
        _fail("dt", "must be positive")

    sv = sc.servo
    for name in ("control_period", "time_constant", "dls_damping",
                 "max_joint_velocity", "position_gain"):
        if getattr(sv, name) <= 0.0:
            _fail(f"servo.{name}", "must be positive")
    if len(sv.convergence_tol) != 2 or min(sv.convergence_tol) <= 0.0:
        _fail("servo.convergence_tol", "needs two positive entries")
    if sv.control_period > sv.time_constant:
        _fail("servo.control_period", "must not exceed servo.time_constant")
    if sc.dt > sv.control_period + 1e-12:
        _fail("dt", "must not exceed servo.control_period")
    ratio = sv.control_period / sc.dt
    if abs(ratio - round(ratio)) > 1e-6:
        _fail("servo.control_period", "must be an integer multiple of dt")

    body = sc.human.body
    for name in ("trunk", "upper_arm", "forearm", "neck"):
        if getattr(body, name) <= 0.0:
            _fail(f"human.body.{name}", "must be positive")
    _check_transform(sc.human.root_pose, "human.root_pose")
    if len(sc.human.initial_q) != 9:
        _fail("human.initial_q", "needs 9 entries")
    for i, s in enumerate(sc.human.trajectory.sinusoids):
        if not 0 <= s.joint < 9:
            _fail(f"human.trajectory.sinusoids.{i}.joint", "must be in [0, 9)")
        if s.frequency < 0.0:
            _fail(f"human.trajectory.sinusoids.{i}.frequency", "must be non-negative")
    last_t = None
    for i, w in enumerate(sc.human.trajectory.waypoints):
        if len(w.q) != 9:
            _fail(f"human.trajectory.waypoints.{i}.q", "needs 9 entries")
        if not 0.0 <= w.t <= sc.duration:
            _fail(f"human.trajectory.waypoints.{i}.t", "must be within [0, duration]")
        if last_t is not None and w.t <= last_t:
            _fail(f"human.trajectory.waypoints.{i}.t", "waypoint times must increase")
        last_t = w.t

    human_model = kin.standard_human(
        kin.BodyModel(body.trunk, body.upper_arm, body.forearm, body.neck,
                      body.shoulder_offset)
    )
    frames = set(human_model.frame_names())
    imu_backend = sc.sensing.backend == "imu"
    attach_frames = set(IMU_ATTACHABLE) if imu_backend else frames

    if sc.attachment.mode not in (PRESERVE_WORLD, PRESERVE_LINKAGE):
        _fail("attachment.mode", f"unknown mode {sc.attachment.mode!r}")
    if sc.attachment.frame not in attach_frames:
        _fail("attachment.frame", f"unknown or non-attachable frame {sc.attachment.frame!r}")

    if sc.linkage.type not in ("fixed", "chain"):
        _fail("linkage.type", f"unknown linkage type {sc.linkage.type!r}")
    _check_transform(sc.linkage.offset, "linkage.offset")
    _check_transform(sc.linkage.mount, "linkage.mount")
    if sc.linkage.type == "chain":
        if sc.linkage.chain is None:
            _fail("linkage.chain", "required for chain-backed linkage")
        chain = _check_chain(sc.linkage.chain, "linkage.chain")
        if sc.linkage.initial_q is not None and len(sc.linkage.initial_q) != chain.dof:
            _fail("linkage.initial_q", f"needs {chain.dof} entries")

    for i, cmd in enumerate(sc.aux_commands):
        if cmd.t < 0.0:
            _fail(f"aux_commands.{i}.t", "must be non-negative")
        if len(cmd.twist) != 6:
            _fail(f"aux_commands.{i}.twist", "needs 6 entries")

    for i, ev in enumerate(sc.events):
        p = f"events.{i}"
        if ev.t < 0.0:
            _fail(p + ".t", "must be non-negative")
        if ev.action not in ("attach", "detach"):
            _fail(p + ".action", f"unknown action {ev.action!r}")
        if ev.action == "attach":
            if not ev.frame:
                _fail(p + ".frame", "attach event needs a frame")
            if ev.frame not in attach_frames:
                _fail(p + ".frame", f"unknown or non-attachable frame {ev.frame!r}")
            if ev.mode is not None and ev.mode not in (PRESERVE_WORLD, PRESERVE_LINKAGE):
                _fail(p + ".mode", f"unknown mode {ev.mode!r}")

    if sc.twist_caps.linear <= 0.0:
        _fail("twist_caps.linear", "must be positive")
    if sc.twist_caps.angular <= 0.0:
        _fail("twist_caps.angular", "must be positive")

    sn = sc.sensing
    if sn.backend not in ("mocap", "imu"):
        _fail("sensing.backend", f"unknown backend {sn.backend!r}")
    for name in ("sigma_t", "sigma_r", "drift_rate"):
        if getattr(sn, name) < 0.0:
            _fail(f"sensing.{name}", "must be non-negative")

    _check_transform(sc.robot.base_pose, "robot.base_pose")
    robot_chain = _check_chain(sc.robot.chain, "robot.chain") if sc.robot.chain else kin.standard_manipulator()
    if sc.robot.initial_q is not None and len(sc.robot.initial_q) != robot_chain.dof:
        _fail("robot.initial_q", f"needs {robot_chain.dof} entries")

    return sc


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario JSON file."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "scenario document must be a JSON object")
    return validate_scenario(doc)


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply `dotted.path=value` overrides to a raw scenario document.

    Values are parsed as JSON when possible, otherwise as strings.
    Integer path segments index into lists.
    """
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(key or "<override>", "override must look like key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = doc
        for i, part in enumerate(parts[:-1]):
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError):
                    raise ConfigError(".".join(parts[: i + 1]), "invalid list index") from None
            else:
                node = node.setdefault(part, {})
                if not isinstance(node, (dict, list)):
                    raise ConfigError(".".join(parts[: i + 1]), "path traverses a scalar value")
        leaf = parts[-1]
        if isinstance(node, list):
            try:
                node[int(leaf)] = value
            except (ValueError, IndexError):
                raise ConfigError(key, "invalid list index") from None
        else:
            node[leaf] = value
    return doc
