"""Rigid-transform algebra over named frames.

Conventions (fixed for the whole package): right-handed coordinates,
meters, radians. Rotations are Hamilton unit quaternions stored
scalar-first ``(w, x, y, z)`` and canonicalized to ``w >= 0`` so that
serialized output is deterministic. A ``Transform`` with frames
``(A, B)`` maps point coordinates from frame A into frame B:

    p_B = R(q) @ p_A + t

``compose(a, b)`` therefore chains ``A -> B`` with ``B -> C`` into
``A -> C``. Frame labels are carried on every transform and checked at
composition time; deliberate relabeling goes through ``reframed``.

Quaternions are renormalized after every composition, inversion and
interpolation, so chained products cannot drift off the unit sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FrameMismatch

FrameId = str

WORLD: FrameId = "W"

_EPS = 1e-12

Quat = tuple[float, float, float, float]
Vec3 = tuple[float, float, float]

IDENTITY_QUAT: Quat = (1.0, 0.0, 0.0, 0.0)
ZERO_VEC: Vec3 = (0.0, 0.0, 0.0)


def quat_mul(a: Quat, b: Quat) -> Quat:
    """Hamilton product a * b (apply b first, then a)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conj(q: Quat) -> Quat:
    w, x, y, z = q
    return (w, -x, -y, -z)


def quat_normalize(q: Quat) -> Quat:
    """Unit-norm, canonicalized (first nonzero component positive)."""
    w, x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n < _EPS:
        raise DomainError("quaternion norm too small to normalize")
    w, x, y, z = w / n, x / n, y / n, z / n
    if w < 0.0 or (w == 0.0 and (x < 0.0 or (x == 0.0 and (y < 0.0 or (y == 0.0 and z < 0.0))))):
        return (-w, -x, -y, -z)
    return (w, x, y, z)


def quat_rotate(q: Quat, v: Vec3) -> Vec3:
    """Rotate vector v by quaternion q: R(q) @ v."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * (u x v), v' = v + w*t + u x t  with u the vector part
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + y * tz - z * ty,
        vy + w * ty + z * tx - x * tz,
        vz + w * tz + x * ty - y * tx,
    )


def quat_from_axis_angle(axis: Vec3, angle: float) -> Quat:
    """Unit quaternion rotating by `angle` about unit `axis`."""
    ax, ay, az = axis
    n = math.sqrt(ax * ax + ay * ay + az * az)
    if n < _EPS:
        if abs(angle) < _EPS:
            return IDENTITY_QUAT
        raise DomainError("rotation axis has zero norm")
    half = 0.5 * angle
    s = math.sin(half) / n
    return quat_normalize((math.cos(half), ax * s, ay * s, az * s))


def quat_angle(q: Quat) -> float:
    """Rotation angle of q in [0, pi]."""
    w, x, y, z = q
    s = math.sqrt(x * x + y * y + z * z)
    return 2.0 * math.atan2(s, abs(w))


def quat_to_rotation_vector(q: Quat) -> Vec3:
    """Axis * angle representation (shortest, angle in [0, pi])."""
    w, x, y, z = q
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s = math.sqrt(x * x + y * y + z * z)
    if s < 1e-9:
        # small angle: vector part ~ axis * angle / 2
        return (2.0 * x, 2.0 * y, 2.0 * z)
    angle = 2.0 * math.atan2(s, w)
    k = angle / s
    return (x * k, y * k, z * k)


def quat_attitude_error(q: Quat) -> Vec3:
    """Quaternion-feedback attitude error 2*w*v = sin(angle) * axis.

    Continuous everywhere on SO(3) (including through the antipode,
    where the shortest rotation vector flips direction) and equal to the
    rotation vector to first order in the angle. The antipode itself is
    an unstable zero.
    """
    w, x, y, z = q
    k = 2.0 * w
    return (k * x, k * y, k * z)


def quat_to_matrix(q: Quat) -> np.ndarray:
    """3x3 rotation matrix of q."""
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> Quat:
    """Unit quaternion of a 3x3 rotation matrix (Shepperd's method)."""
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
    return quat_normalize(q)


@dataclass(frozen=True, slots=True)
class Transform:
    """Rigid SE(3) pose of frame `from_frame` expressed in `to_frame`."""

    rotation: Quat
    translation: Vec3
    from_frame: FrameId
    to_frame: FrameId

    def to_dict(self) -> dict:
        return {
            "from": self.from_frame,
            "to": self.to_frame,
            "q": list(self.rotation),
            "t": list(self.translation),
        }

    @staticmethod
    def from_dict(d: dict) -> "Transform":
        q = d["q"]
        t = d["t"]
        return Transform(
            quat_normalize((float(q[0]), float(q[1]), float(q[2]), float(q[3]))),
            (float(t[0]), float(t[1]), float(t[2])),
            str(d["from"]),
            str(d["to"]),
        )


def identity(frame: FrameId = WORLD, to_frame: FrameId | None = None) -> Transform:
    return Transform(IDENTITY_QUAT, ZERO_VEC, frame, frame if to_frame is None else to_frame)


def make_transform(
    rotation: Quat,
    translation: Vec3,
    from_frame: FrameId = "",
    to_frame: FrameId = "",
) -> Transform:
    """Validating constructor: normalizes and canonicalizes the rotation."""
    t = translation
    return Transform(
        quat_normalize(rotation),
        (float(t[0]), float(t[1]), float(t[2])),
        from_frame,
        to_frame,
    )


def translation(x: float, y: float, z: float, from_frame: FrameId = "", to_frame: FrameId = "") -> Transform:
    return Transform(IDENTITY_QUAT, (float(x), float(y), float(z)), from_frame, to_frame)


def rotation_about(axis: Vec3, angle: float, from_frame: FrameId = "", to_frame: FrameId = "") -> Transform:
    return Transform(quat_from_axis_angle(axis, angle), ZERO_VEC, from_frame, to_frame)


def rot_x(angle: float, from_frame: FrameId = "", to_frame: FrameId = "") -> Transform:
    return rotation_about((1.0, 0.0, 0.0), angle, from_frame, to_frame)


def rot_y(angle: float, from_frame: FrameId = "", to_frame: FrameId = "") -> Transform:
    return rotation_about((0.0, 1.0, 0.0), angle, from_frame, to_frame)


def rot_z(angle: float, from_frame: FrameId = "", to_frame: FrameId = "") -> Transform:
    return rotation_about((0.0, 0.0, 1.0), angle, from_frame, to_frame)


def reframed(t: Transform, from_frame: FrameId, to_frame: FrameId) -> Transform:
    """Deliberate relabeling of the frame pair; the motion is unchanged."""
    return Transform(t.rotation, t.translation, from_frame, to_frame)


def compose(a: Transform, b: Transform) -> Transform:
    """Chain a: A->B with b: B->C into A->C.

    Raises FrameMismatch when the inner frames differ.
    """
    if a.to_frame != b.from_frame:
        raise FrameMismatch(
            f"cannot compose {a.from_frame}->{a.to_frame} with {b.from_frame}->{b.to_frame}"
        )
    q = quat_normalize(quat_mul(b.rotation, a.rotation))
    tx, ty, tz = quat_rotate(b.rotation, a.translation)
    bt = b.translation
    return Transform(q, (tx + bt[0], ty + bt[1], tz + bt[2]), a.from_frame, b.to_frame)


def inverse(t: Transform) -> Transform:
    """Inverse motion with the frame pair swapped."""
    q = quat_conj(t.rotation)
    x, y, z = quat_rotate(q, t.translation)
    return Transform(quat_normalize(q), (-x, -y, -z), t.to_frame, t.from_frame)


def _check_same_frames(a: Transform, b: Transform) -> None:
    if a.from_frame != b.from_frame or a.to_frame != b.to_frame:
        raise FrameMismatch(
            f"expected matching frames, got {a.from_frame}->{a.to_frame} "
            f"and {b.from_frame}->{b.to_frame}"
        )


def _pose_delta(a: Transform, b: Transform) -> tuple[float, float]:
    at, bt = a.translation, b.translation
    dx, dy, dz = at[0] - bt[0], at[1] - bt[1], at[2] - bt[2]
    d_trans = math.sqrt(dx * dx + dy * dy + dz * dz)
    if a.rotation == b.rotation:
        return d_trans, 0.0
    d_rot = quat_angle(quat_mul(quat_conj(a.rotation), b.rotation))
    return d_trans, d_rot


def pose_error(a: Transform, b: Transform) -> tuple[float, float]:
    """(translation distance [m], relative rotation angle [rad] in [0, pi])."""
    _check_same_frames(a, b)
    return _pose_delta(a, b)


def interpolate(a: Transform, b: Transform, s: float) -> Transform:
    """Lerp translation / slerp rotation (shortest arc); s in [0, 1]."""
    _check_same_frames(a, b)
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"interpolation parameter must be in [0, 1], got {s}")
    if s == 0.0:
        return a
    if s == 1.0:
        return b
    at, bt = a.translation, b.translation
    t = (
        at[0] + s * (bt[0] - at[0]),
        at[1] + s * (bt[1] - at[1]),
        at[2] + s * (bt[2] - at[2]),
    )
    aw, ax, ay, az = a.rotation
    bw, bx, by, bz = b.rotation
    dot = aw * bw + ax * bx + ay * by + az * bz
    if dot < 0.0:
        bw, bx, by, bz, dot = -bw, -bx, -by, -bz, -dot
    if dot > 1.0 - 1e-12:
        # nearly parallel: linear blend is numerically exact enough
        ka, kb = 1.0 - s, s
    else:
        omega = math.acos(min(1.0, dot))
        so = math.sin(omega)
        ka = math.sin((1.0 - s) * omega) / so
        kb = math.sin(s * omega) / so
    q = quat_normalize((ka * aw + kb * bw, ka * ax + kb * bx, ka * ay + kb * by, ka * az + kb * bz))
    return Transform(q, t, a.from_frame, a.to_frame)
