"""Serial kinematic chains: forward kinematics, geometric Jacobian,
serial connection, and the canonical human / manipulator models.

A chain runs base -> tip. Each joint carries a fixed link transform
(`rest_offset`, applied before the joint motion) and a motion axis
expressed in the frame right after that offset. `forward_kinematics`
returns the tip pose in the base frame (a Transform tip -> base). The
human upper body is a tree (arm branch + head branch) sharing the trunk
joints; serial chains are extracted from it per attachable frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import DimensionMismatch, DomainError, UnknownFrame
from .geometry import Transform

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


@dataclass(frozen=True)
class JointSpec:
    """One joint: fixed link offset, then motion about/along `axis`."""

    name: str
    kind: str
    axis: geo.Vec3
    limits: tuple[float, float]
    rest_offset: Transform
    frame: str = ""

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise DomainError(f"joint {self.name}: unknown kind {self.kind!r}")
        ax, ay, az = self.axis
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if abs(n - 1.0) > 1e-9:
            raise DomainError(f"joint {self.name}: axis norm {n} != 1")
        lo, hi = self.limits
        if lo > hi:
            raise DomainError(f"joint {self.name}: limits {lo} > {hi}")
        if not self.frame:
            object.__setattr__(self, "frame", self.name)


def _offset_of(t: Transform) -> tuple[geo.Quat, geo.Vec3]:
    return t.rotation, t.translation


def _merge_motion(outer_q, outer_t, inner_q, inner_t):
    """Compose raw motions: apply inner first, then outer."""
    q = geo.quat_normalize(geo.quat_mul(outer_q, inner_q))
    x, y, z = geo.quat_rotate(outer_q, inner_t)
    return q, (x + outer_t[0], y + outer_t[1], z + outer_t[2])


@dataclass(frozen=True)
class KinematicChain:
    """Ordered joints from `base_frame` to `tip_frame`.

    `tip_offset` is the fixed transform from the tip frame to the last
    joint frame (the trailing link). A chain may have zero joints, in
    which case it is a rigid offset.
    """

    base_frame: str
    joints: tuple[JointSpec, ...]
    tip_frame: str
    tip_offset: Transform = field(default_factory=lambda: geo.identity(""))
    reach_bound: float = field(init=False, default=0.0)
    limits_lo: np.ndarray = field(init=False, default=None, repr=False, compare=False)
    limits_hi: np.ndarray = field(init=False, default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        names = [self.base_frame] + [j.frame for j in self.joints]
        if len(set(names)) != len(names):
            raise DomainError(f"chain {self.base_frame}->{self.tip_frame}: duplicate frame names")
        # the tip may coincide with the last link frame, never with earlier ones
        if self.tip_frame in names[:-1]:
            raise DomainError(f"chain {self.base_frame}->{self.tip_frame}: tip duplicates a frame")
        bound = 0.0
        for j in self.joints:
            tx, ty, tz = j.rest_offset.translation
            bound += math.sqrt(tx * tx + ty * ty + tz * tz)
            if j.kind == PRISMATIC:
                bound += max(abs(j.limits[0]), abs(j.limits[1]))
        tx, ty, tz = self.tip_offset.translation
        bound += math.sqrt(tx * tx + ty * ty + tz * tz)
        object.__setattr__(self, "reach_bound", bound)
        object.__setattr__(self, "limits_lo", np.array([j.limits[0] for j in self.joints]))
        object.__setattr__(self, "limits_hi", np.array([j.limits[1] for j in self.joints]))

    @property
    def dof(self) -> int:
        return len(self.joints)

    def frame_names(self) -> list[str]:
        names = [self.base_frame] + [j.frame for j in self.joints]
        if self.tip_frame not in names:
            names.append(self.tip_frame)
        return names


def check_dimension(chain: KinematicChain, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise DimensionMismatch(f"joint vector has shape {q.shape}, chain has {chain.dof} joints")
    return q


def clamp_to_limits(chain: KinematicChain, q) -> np.ndarray:
    q = check_dimension(chain, q)
    return np.clip(q, chain.limits_lo, chain.limits_hi)


def apply_limits(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Bring a joint vector inside the limits.

    Revolute joints whose range spans at least a full turn are periodic
    coordinates: values outside the range wrap by whole turns (forward
    kinematics is invariant under this), so a velocity controller can
    never wedge against their range boundary. Other joints clip.
    """
    out = np.clip(q, chain.limits_lo, chain.limits_hi)
    for i, j in enumerate(chain.joints):
        if q[i] == out[i] or j.kind != REVOLUTE:
            continue
        lo, hi = j.limits
        if hi - lo < math.tau - 1e-9:
            continue
        v = q[i]
        if v > hi:
            v -= math.tau * math.ceil((v - hi) / math.tau)
        elif v < lo:
            v += math.tau * math.ceil((lo - v) / math.tau)
        out[i] = v if lo <= v <= hi else out[i]
    return out


def _joint_motion(j: JointSpec, value: float) -> tuple[geo.Quat, geo.Vec3]:
    if j.kind == REVOLUTE:
        return geo.quat_from_axis_angle(j.axis, value), geo.ZERO_VEC
    ax, ay, az = j.axis
    return geo.IDENTITY_QUAT, (ax * value, ay * value, az * value)


def _fk_pass(chain: KinematicChain, q: np.ndarray, collect: bool):
    """Walk base -> tip; optionally collect per-joint origin/axis in base frame."""
    acc_q: geo.Quat = geo.IDENTITY_QUAT
    acc_t: geo.Vec3 = geo.ZERO_VEC
    joint_data = [] if collect else None
    for j, value in zip(chain.joints, q):
        rq, rt = _offset_of(j.rest_offset)
        acc_q, acc_t = _merge_motion(acc_q, acc_t, rq, rt)
        if collect:
            joint_data.append((acc_t, geo.quat_rotate(acc_q, j.axis), j.kind))
        mq, mt = _joint_motion(j, float(value))
        acc_q, acc_t = _merge_motion(acc_q, acc_t, mq, mt)
    tq, tt = _offset_of(chain.tip_offset)
    acc_q, acc_t = _merge_motion(acc_q, acc_t, tq, tt)
    return acc_q, acc_t, joint_data


def forward_kinematics(chain: KinematicChain, q) -> Transform:
    """Tip pose in the base frame (Transform tip_frame -> base_frame)."""
    q = check_dimension(chain, q)
    acc_q, acc_t, _ = _fk_pass(chain, q, collect=False)
    return Transform(acc_q, acc_t, chain.tip_frame, chain.base_frame)


def frame_poses(chain: KinematicChain, q) -> dict[str, Transform]:
    """Pose of every named link frame (and the tip) in the base frame."""
    q = check_dimension(chain, q)
    poses: dict[str, Transform] = {chain.base_frame: geo.identity(chain.base_frame)}
    acc_q: geo.Quat = geo.IDENTITY_QUAT
    acc_t: geo.Vec3 = geo.ZERO_VEC
    for j, value in zip(chain.joints, q):
        rq, rt = _offset_of(j.rest_offset)
        acc_q, acc_t = _merge_motion(acc_q, acc_t, rq, rt)
        mq, mt = _joint_motion(j, float(value))
        acc_q, acc_t = _merge_motion(acc_q, acc_t, mq, mt)
        poses[j.frame] = Transform(acc_q, acc_t, j.frame, chain.base_frame)
    tq, tt = _offset_of(chain.tip_offset)
    acc_q, acc_t = _merge_motion(acc_q, acc_t, tq, tt)
    poses[chain.tip_frame] = Transform(acc_q, acc_t, chain.tip_frame, chain.base_frame)
    return poses


def _jacobian_from_pass(tip_t, joint_data) -> np.ndarray:
    J = np.zeros((6, len(joint_data)))
    px, py, pz = tip_t
    for i, (origin, axis, kind) in enumerate(joint_data):
        zx, zy, zz = axis
        if kind == REVOLUTE:
            rx, ry, rz = px - origin[0], py - origin[1], pz - origin[2]
            J[0, i] = zy * rz - zz * ry
            J[1, i] = zz * rx - zx * rz
            J[2, i] = zx * ry - zy * rx
            J[3, i] = zx
            J[4, i] = zy
            J[5, i] = zz
        else:
            J[0, i] = zx
            J[1, i] = zy
            J[2, i] = zz
    return J


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Geometric Jacobian of the tip, 6 x n (rows: linear xyz, angular xyz)."""
    q = check_dimension(chain, q)
    _, tip_t, joint_data = _fk_pass(chain, q, collect=True)
    return _jacobian_from_pass(tip_t, joint_data)


def chain_to_frame(chain: KinematicChain, frame: str) -> KinematicChain:
    """Truncate the chain so `frame` becomes the tip.

    `frame` may be the tip itself, the base, or any named joint frame.
    """
    if frame == chain.tip_frame:
        return chain
    if frame == chain.base_frame:
        return KinematicChain(chain.base_frame, (), chain.base_frame, geo.identity(""))
    for i, j in enumerate(chain.joints):
        if j.frame == frame:
            return KinematicChain(chain.base_frame, chain.joints[: i + 1], frame, geo.identity(""))
    raise UnknownFrame(f"frame {frame!r} not in chain {chain.base_frame}->{chain.tip_frame}")


def connect_serial(human: KinematicChain, attach_frame: str, extension: KinematicChain) -> KinematicChain:
    """Serially connect `extension` to `human` at `attach_frame`.

    The combined joint vector is the human prefix followed by the
    extension joints; combined FK equals compose(FK(extension),
    FK(human truncated at attach_frame)) for every joint vector.
    """
    prefix = chain_to_frame(human, attach_frame)
    # fixed offset still pending between the attach frame and the extension
    pend_q, pend_t = _offset_of(prefix.tip_offset)
    prefix_joints = prefix.joints

    human_frames = {human.base_frame, *(j.frame for j in prefix_joints)}
    ext_frames = {j.frame for j in extension.joints} | {extension.tip_frame}
    clash = human_frames & ext_frames
    if clash:
        raise DomainError(f"extension reuses human frame names: {sorted(clash)}")

    new_joints = list(prefix_joints)
    if extension.joints:
        first = extension.joints[0]
        rq, rt = _merge_motion(pend_q, pend_t, *_offset_of(first.rest_offset))
        new_joints.append(
            JointSpec(first.name, first.kind, first.axis, first.limits,
                      Transform(rq, rt, "", ""), first.frame)
        )
        new_joints.extend(extension.joints[1:])
        tip_offset = extension.tip_offset
    else:
        tq, tt = _merge_motion(pend_q, pend_t, *_offset_of(extension.tip_offset))
        tip_offset = Transform(tq, tt, "", "")
    return KinematicChain(human.base_frame, tuple(new_joints), extension.tip_frame, tip_offset)


# --- canonical models -------------------------------------------------------

@dataclass(frozen=True)
class BodyModel:
    """Segment lengths of the simple upper-body model, in meters."""

    trunk: float = 0.5
    upper_arm: float = 0.3
    forearm: float = 0.25
    neck: float = 0.1
    shoulder_offset: float = 0.2
    root_frame: str = "pelvis"

    def __post_init__(self):
        for name in ("trunk", "upper_arm", "forearm", "neck"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"body segment {name} must be positive")


# canonical order of the 9 human joints
HUMAN_JOINT_NAMES = (
    "trunk_yaw", "trunk_pitch", "trunk_roll",
    "shoulder_yaw", "shoulder_pitch", "shoulder_roll",
    "elbow",
    "neck_yaw", "neck_pitch",
)

ARM_JOINT_INDICES = (0, 1, 2, 3, 4, 5, 6)
HEAD_JOINT_INDICES = (0, 1, 2, 7, 8)

ATTACHABLE_FRAMES = ("head", "trunk", "upper_arm", "forearm", "hand")


@dataclass(frozen=True)
class HumanModel:
    """Branched upper-body model: an arm chain and a head chain sharing
    the three trunk joints. Joint vectors are 9-dim in HUMAN_JOINT_NAMES
    order; branch chains are indexed into it via *_JOINT_INDICES.
    """

    body: BodyModel
    arm_chain: KinematicChain
    head_chain: KinematicChain

    @property
    def joint_count(self) -> int:
        return 9

    @property
    def root_frame(self) -> str:
        return self.body.root_frame

    def frame_names(self) -> list[str]:
        names = self.arm_chain.frame_names()
        for f in self.head_chain.frame_names():
            if f not in names:
                names.append(f)
        return names

    def chain_for_frame(self, frame: str) -> tuple[KinematicChain, tuple[int, ...]]:
        """Serial chain from the root to `frame` plus its q-vector indices."""
        arm_frames = self.arm_chain.frame_names()
        head_frames = self.head_chain.frame_names()
        if frame in arm_frames:
            chain = chain_to_frame(self.arm_chain, frame) if frame != self.arm_chain.tip_frame else self.arm_chain
            return chain, ARM_JOINT_INDICES[: chain.dof]
        if frame in head_frames:
            chain = chain_to_frame(self.head_chain, frame) if frame != self.head_chain.tip_frame else self.head_chain
            return chain, HEAD_JOINT_INDICES[: chain.dof]
        raise UnknownFrame(f"frame {frame!r} not in human model")

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (9,):
            raise DimensionMismatch(f"human joint vector has shape {q.shape}, expected (9,)")
        return q

    def clamp_q(self, q) -> np.ndarray:
        q = self.check_q(q)
        lo, hi = self.limits()
        return np.clip(q, lo, hi)

    def limits(self) -> tuple[np.ndarray, np.ndarray]:
        arm = self.arm_chain.joints
        head = self.head_chain.joints
        specs = list(arm) + [head[3], head[4]]
        return (np.array([s.limits[0] for s in specs]), np.array([s.limits[1] for s in specs]))

    def frame_poses(self, q) -> dict[str, Transform]:
        """All named frame poses in the root frame for a 9-dim q."""
        q = self.check_q(q)
        poses = frame_poses(self.arm_chain, q[list(ARM_JOINT_INDICES)])
        head = frame_poses(self.head_chain, q[list(HEAD_JOINT_INDICES)])
        for name, pose in head.items():
            poses.setdefault(name, pose)
        return poses


def standard_human(body: BodyModel | None = None) -> HumanModel:
    """Canonical 9-joint upper body: 3R trunk, 3R shoulder, 1R elbow,
    2R neck. At zero q the torso is upright (+z), the arm hangs down
    from the left shoulder and the head sits above the trunk.
    """
    body = body or BodyModel()
    root = body.root_frame
    ident = geo.identity("")

    def rj(name, axis, limits, rest=ident, frame=""):
        return JointSpec(name, REVOLUTE, axis, limits, rest, frame or name)

    trunk = [
        rj("trunk_yaw", (0.0, 0.0, 1.0), (-1.2, 1.2)),
        rj("trunk_pitch", (0.0, 1.0, 0.0), (-0.9, 0.9)),
        rj("trunk_roll", (1.0, 0.0, 0.0), (-0.7, 0.7), frame="trunk"),
    ]
    shoulder_rest = geo.translation(0.0, body.shoulder_offset, body.trunk)
    arm = trunk + [
        rj("shoulder_yaw", (0.0, 0.0, 1.0), (-2.0, 2.0), rest=shoulder_rest),
        rj("shoulder_pitch", (0.0, 1.0, 0.0), (-1.3, 1.3)),
        rj("shoulder_roll", (1.0, 0.0, 0.0), (-1.8, 1.8), frame="upper_arm"),
        rj("elbow", (0.0, 1.0, 0.0), (-2.4, 0.05),
           rest=geo.translation(0.0, 0.0, -body.upper_arm), frame="forearm"),
    ]
    arm_chain = KinematicChain(root, tuple(arm), "hand",
                               geo.translation(0.0, 0.0, -body.forearm))
    neck_rest = geo.translation(0.0, 0.0, body.trunk)
    head = trunk + [
        rj("neck_yaw", (0.0, 0.0, 1.0), (-1.2, 1.2), rest=neck_rest),
        rj("neck_pitch", (0.0, 1.0, 0.0), (-0.8, 0.8), frame="neck"),
    ]
    head_chain = KinematicChain(root, tuple(head), "head",
                                geo.translation(0.0, 0.0, body.neck))
    return HumanModel(body, arm_chain, head_chain)


# straight-up rest pose reaches 0.20 + 0.35 + 0.25 + 0.10 = 0.90 m
MANIPULATOR_REACH = 0.9
# ready posture: reaching forward, away from the base-column and wrist
# singular regions (sigma_min ~ 0.15)
MANIPULATOR_HOME = (0.0, 1.0, -1.3, 0.0, 0.9, 0.0)

_TWO_PI = 2.0 * math.pi


def standard_manipulator() -> KinematicChain:
    """Canonical 6R manipulator, 0.9 m reach, base frame `robot_base`.

    Anthropomorphic layout: base yaw, shoulder pitch, elbow pitch, then
    a roll-pitch-roll wrist. All joints are continuous (no mechanical
    stops; the declared range of +-16 pi is outside anything reachable
    in a run), so the velocity controller never wedges against a limit
    wall. At zero q the arm points straight up with the tool at
    (0, 0, 0.9).
    """
    ident = geo.identity("")

    def rj(name, axis, rest=ident):
        return JointSpec(name, REVOLUTE, axis, (-8 * _TWO_PI, 8 * _TWO_PI), rest, "r_" + name)

    joints = (
        rj("base", (0.0, 0.0, 1.0), rest=geo.translation(0.0, 0.0, 0.20)),
        rj("shoulder", (0.0, 1.0, 0.0)),
        rj("elbow", (0.0, 1.0, 0.0), rest=geo.translation(0.0, 0.0, 0.35)),
        rj("wrist_roll", (0.0, 0.0, 1.0), rest=geo.translation(0.0, 0.0, 0.25)),
        rj("wrist_pitch", (0.0, 1.0, 0.0)),
        rj("tool_roll", (0.0, 0.0, 1.0)),
    )
    return KinematicChain("robot_base", joints, "tool", geo.translation(0.0, 0.0, 0.10))


def standard_models(body: BodyModel | None = None) -> tuple[HumanModel, KinematicChain]:
    """The canonical (human upper body, manipulator) pair."""
    return standard_human(body), standard_manipulator()
