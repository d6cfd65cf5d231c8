"""Measurement backends: idealized optical mocap with Gaussian noise,
wearable IMU upper-body reconstruction anchored by a headset SLAM pose,
and rigid robot-to-world calibration.

All stochastic operations are pure functions of (inputs, seed): the
same seed reproduces the same sample bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import geometry as geo
from .errors import DegenerateGeometry, DomainError, MissingSegment
from .geometry import Transform
from .kinematics import BodyModel

# E[norm(N(0, I_3))], used to scale drift so E|bias| = rate * elapsed
_CHI3_MEAN = 2.0 * math.sqrt(2.0 / math.pi)

IMU_SEGMENTS = ("trunk", "upper_arm", "forearm")


@dataclass(frozen=True)
class MocapSample:
    frame: str
    pose: Transform
    sigma_t: float
    sigma_r: float
    timestamp: float = 0.0


@dataclass(frozen=True)
class ImuSample:
    segment: str
    orientation: geo.Quat          # segment -> world
    angular_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "orientation", geo.quat_normalize(self.orientation))


@dataclass(frozen=True)
class CalibrationResult:
    transform: Transform           # robot_base -> world
    residual_rms: float


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def mocap_measure(true_pose: Transform, sigma_t: float, sigma_r: float,
                  seed, timestamp: float = 0.0) -> MocapSample:
    """Marker pose with per-axis Gaussian translation noise and an
    axis-angle rotation perturbation (Gaussian angle, uniform axis)."""
    if sigma_t < 0.0 or sigma_r < 0.0:
        raise DomainError("mocap noise levels must be non-negative")
    rng = _rng(seed)
    dt = rng.normal(0.0, 1.0, 3)
    axis = rng.normal(0.0, 1.0, 3)
    angle = float(rng.normal(0.0, 1.0)) * sigma_r
    n = float(np.linalg.norm(axis))
    if n < 1e-12:
        axis, n = np.array([1.0, 0.0, 0.0]), 1.0
    t = true_pose.translation
    noisy_t = (t[0] + dt[0] * sigma_t, t[1] + dt[1] * sigma_t, t[2] + dt[2] * sigma_t)
    if angle != 0.0:
        perturb = geo.quat_from_axis_angle((axis[0] / n, axis[1] / n, axis[2] / n), angle)
        q = geo.quat_normalize(geo.quat_mul(perturb, true_pose.rotation))
    else:
        q = true_pose.rotation
    pose = Transform(q, noisy_t, true_pose.from_frame, true_pose.to_frame)
    return MocapSample(true_pose.from_frame, pose, sigma_t, sigma_r, timestamp)


def slam_head_pose(true_head_pose: Transform, drift_rate: float, elapsed: float, seed) -> Transform:
    """Head pose with a slowly accumulating translation bias.

    The bias grows along a seed-determined random direction with expected
    magnitude drift_rate * elapsed (linearized drift model, temporally
    coherent for a fixed seed).
    """
    if drift_rate < 0.0:
        raise DomainError("drift_rate must be non-negative")
    if drift_rate == 0.0 or elapsed == 0.0:
        return true_head_pose
    z = _rng(seed).normal(0.0, 1.0, 3)
    scale = drift_rate * elapsed / _CHI3_MEAN
    t = true_head_pose.translation
    return Transform(
        true_head_pose.rotation,
        (t[0] + z[0] * scale, t[1] + z[1] * scale, t[2] + z[2] * scale),
        true_head_pose.from_frame,
        true_head_pose.to_frame,
    )


def _euler_zyx(m: np.ndarray) -> tuple[float, float, float]:
    """Intrinsic z-y-x angles of R = Rz(a) Ry(b) Rx(c)."""
    b = math.asin(max(-1.0, min(1.0, -m[2, 0])))
    a = math.atan2(m[1, 0], m[0, 0])
    c = math.atan2(m[2, 1], m[2, 2])
    return a, b, c


def _euler_zy(m: np.ndarray) -> tuple[float, float]:
    """Intrinsic z-y angles of R = Rz(a) Ry(b)."""
    a = math.atan2(-m[0, 1], m[1, 1])
    b = math.atan2(-m[2, 0], m[2, 2])
    return a, b


def reconstruct_upper_body(head_pose: Transform, imus: Mapping[str, ImuSample] | Iterable[ImuSample],
                           model: BodyModel,
                           root_rotation: geo.Quat = geo.IDENTITY_QUAT,
                           ) -> tuple[np.ndarray, dict[str, Transform]]:
    """Rebuild joint angles and world poses of all body frames from the
    headset pose and one orientation IMU per segment.

    The chain root is anchored by propagating the head pose down the
    neck and trunk; segment orientations come from the IMUs and
    positions follow from the segment lengths. `root_rotation` is the
    known world orientation of the root frame (the angle reference).
    """
    if not isinstance(imus, Mapping):
        imus = {s.segment: s for s in imus}
    for segment in IMU_SEGMENTS:
        if segment not in imus:
            raise MissingSegment(f"no IMU sample for segment {segment!r}")

    world = head_pose.to_frame
    q_head = head_pose.rotation
    q_trunk = imus["trunk"].orientation
    q_ua = imus["upper_arm"].orientation
    q_fa = imus["forearm"].orientation

    def pos(base, q_seg, local):
        dx, dy, dz = geo.quat_rotate(q_seg, local)
        return (base[0] + dx, base[1] + dy, base[2] + dz)

    head_p = head_pose.translation
    trunk_top = pos(head_p, q_head, (0.0, 0.0, -model.neck))
    pelvis = pos(trunk_top, q_trunk, (0.0, 0.0, -model.trunk))
    shoulder = pos(pelvis, q_trunk, (0.0, model.shoulder_offset, model.trunk))
    elbow = pos(shoulder, q_ua, (0.0, 0.0, -model.upper_arm))
    hand = pos(elbow, q_fa, (0.0, 0.0, -model.forearm))

    frames = {
        model.root_frame: Transform(geo.quat_normalize(root_rotation), pelvis, model.root_frame, world),
        "trunk": Transform(q_trunk, pelvis, "trunk", world),
        "upper_arm": Transform(q_ua, shoulder, "upper_arm", world),
        "forearm": Transform(q_fa, elbow, "forearm", world),
        "hand": Transform(q_fa, hand, "hand", world),
        "head": Transform(q_head, head_p, "head", world),
    }

    def rel(parent: geo.Quat, child: geo.Quat) -> np.ndarray:
        return geo.quat_to_matrix(geo.quat_mul(geo.quat_conj(parent), child))

    t_yaw, t_pitch, t_roll = _euler_zyx(rel(root_rotation, q_trunk))
    s_yaw, s_pitch, s_roll = _euler_zyx(rel(q_trunk, q_ua))
    m_elbow = rel(q_ua, q_fa)
    elbow_angle = math.atan2(m_elbow[0, 2], m_elbow[0, 0])
    n_yaw, n_pitch = _euler_zy(rel(q_trunk, q_head))

    angles = np.array([t_yaw, t_pitch, t_roll, s_yaw, s_pitch, s_roll,
                       elbow_angle, n_yaw, n_pitch])
    return angles, frames


def synthesize_imus(frames: Mapping[str, Transform], timestamp: float = 0.0,
                    sigma_r: float = 0.0, seed=None) -> dict[str, ImuSample]:
    """IMU samples consistent with ground-truth body frame poses,
    optionally perturbed by an axis-angle orientation noise."""
    rng = _rng(seed) if sigma_r > 0.0 else None
    out = {}
    for segment in IMU_SEGMENTS:
        q = frames[segment].rotation
        if rng is not None:
            axis = rng.normal(0.0, 1.0, 3)
            n = float(np.linalg.norm(axis))
            if n < 1e-12:
                axis, n = np.array([1.0, 0.0, 0.0]), 1.0
            angle = float(rng.normal(0.0, sigma_r))
            q = geo.quat_normalize(geo.quat_mul(
                geo.quat_from_axis_angle((axis[0] / n, axis[1] / n, axis[2] / n), angle), q))
        out[segment] = ImuSample(segment, q, timestamp=timestamp)
    return out


def calibrate_robot_to_world(correspondences: Iterable[tuple[Transform, Transform]],
                             ) -> CalibrationResult:
    """Least-squares rigid alignment (Kabsch) of robot-frame poses onto
    world poses, using the translation correspondences."""
    pairs = list(correspondences)
    if len(pairs) < 3:
        raise DegenerateGeometry(f"need at least 3 correspondences, got {len(pairs)}")
    A = np.array([p[0].translation for p in pairs])
    B = np.array([p[1].translation for p in pairs])
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    Ac, Bc = A - ca, B - cb
    s = np.linalg.svd(Ac, compute_uv=False)
    if s[1] <= 1e-9:
        raise DegenerateGeometry("correspondence points are collinear")
    H = Ac.T @ Bc
    U, _, Vt = np.linalg.svd(H)
    d = float(np.sign(np.linalg.det(Vt.T @ U.T)))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    residuals = (A @ R.T + t) - B
    rms = float(np.sqrt(np.mean(np.sum(residuals * residuals, axis=1))))
    world = pairs[0][1].to_frame
    tf = Transform(geo.quat_from_matrix(R), (float(t[0]), float(t[1]), float(t[2])),
                   "robot_base", world)
    return CalibrationResult(tf, rms)
