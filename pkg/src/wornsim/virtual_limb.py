"""The virtually worn arm: attachment to a body frame, the virtual
linkage from the body frame to the virtual effector, auxiliary twist
control, and attach/detach semantics.

The linkage pose maps the virtual effector frame E_AR into the chosen
body frame; composing it with the body frame's world pose yields the
world pose the manipulator is servoed to. While detached the last world
pose is frozen and body motion no longer moves the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import geometry as geo
from . import kinematics as kin
from . import servo as servo_mod
from .errors import Detached, DomainError, UnknownFrame
from .geometry import Transform
from .kinematics import KinematicChain

EFFECTOR_FRAME = "E_AR"

# default offset of the virtual effector in front of the attachment frame
DEFAULT_LINKAGE_OFFSET = (0.4, 0.0, 0.0)

PRESERVE_WORLD = "preserve_world"
PRESERVE_LINKAGE = "preserve_linkage"


@dataclass(frozen=True)
class TwistCaps:
    """Magnitude caps applied to auxiliary twists before integration."""

    linear: float = 0.5     # m/s
    angular: float = 1.5    # rad/s


@dataclass(frozen=True)
class AttachmentPoint:
    body_frame: str


@dataclass(frozen=True)
class AuxiliaryCommand:
    """Joystick-like command: twist of E_AR relative to the body frame."""

    twist: tuple[float, float, float, float, float, float] = (0.0,) * 6
    gripper: bool = False
    timestamp: float = 0.0


@dataclass(frozen=True)
class FixedLinkage:
    """Rigid virtual linkage: a fixed offset E_AR -> body frame."""

    offset: Transform


@dataclass(frozen=True)
class ChainLinkage:
    """Articulated virtual linkage: a chain mounted on the body frame.

    `mount` fixes the chain base in the body frame; the chain tip is the
    virtual effector.
    """

    chain: KinematicChain
    q: np.ndarray
    mount: Transform


Linkage = FixedLinkage | ChainLinkage


@dataclass(frozen=True)
class VirtualLimbState:
    attachment: AttachmentPoint | None
    linkage: Linkage
    last_world_pose: Transform
    gripper: bool = False

    @property
    def attached(self) -> bool:
        return self.attachment is not None


def default_linkage(body_frame: str) -> FixedLinkage:
    x, y, z = DEFAULT_LINKAGE_OFFSET
    return FixedLinkage(geo.translation(x, y, z, EFFECTOR_FRAME, body_frame))


def linkage_pose(linkage: Linkage, body_frame: str) -> Transform:
    """Current transform E_AR -> body frame of the linkage."""
    if isinstance(linkage, FixedLinkage):
        return geo.reframed(linkage.offset, EFFECTOR_FRAME, body_frame)
    fk = kin.forward_kinematics(linkage.chain, linkage.q)
    mount = geo.reframed(linkage.mount, fk.to_frame, body_frame)
    return geo.reframed(geo.compose(fk, mount), EFFECTOR_FRAME, body_frame)


def virtual_effector_world(link_pose: Transform, body_pose: Transform) -> Transform:
    """World pose of the virtual effector: compose(E_AR -> E_H, E_H -> W)."""
    return geo.compose(link_pose, body_pose)


def _clamp_twist(twist, caps: TwistCaps) -> np.ndarray:
    t = np.asarray(twist, dtype=float)
    if t.shape != (6,):
        raise DomainError(f"twist must have 6 entries, got shape {t.shape}")
    v, w = t[:3].copy(), t[3:].copy()
    vn = float(np.linalg.norm(v))
    if vn > caps.linear:
        v *= caps.linear / vn
    wn = float(np.linalg.norm(w))
    if wn > caps.angular:
        w *= caps.angular / wn
    return np.concatenate([v, w])


def _advance_pose(q_rot: geo.Quat, t: geo.Vec3, v: np.ndarray, w: np.ndarray, dt: float):
    """Integrate a body-frame twist over dt onto a (rotation, translation) pair."""
    t_new = (t[0] + v[0] * dt, t[1] + v[1] * dt, t[2] + v[2] * dt)
    wn = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    if wn > 0.0:
        step = geo.quat_from_axis_angle((w[0] / wn, w[1] / wn, w[2] / wn), wn * dt)
        q_new = geo.quat_normalize(geo.quat_mul(step, q_rot))
    else:
        q_new = q_rot
    return q_new, t_new


def apply_aux_command(state: VirtualLimbState, cmd: AuxiliaryCommand, dt: float,
                      caps: TwistCaps | None = None,
                      ik_cfg: servo_mod.ServoConfig | None = None) -> VirtualLimbState:
    """Integrate a capped auxiliary twist over dt; twists are expressed in
    the attachment (body) frame."""
    if dt <= 0.0:
        raise DomainError(f"apply_aux_command dt must be positive, got {dt}")
    if not state.attached:
        raise Detached("cannot apply auxiliary command while detached")
    twist = _clamp_twist(cmd.twist, caps or TwistCaps())
    v, w = twist[:3], twist[3:]
    linkage = state.linkage
    if isinstance(linkage, FixedLinkage):
        off = linkage.offset
        q_new, t_new = _advance_pose(off.rotation, off.translation, v, w, dt)
        new_linkage: Linkage = FixedLinkage(Transform(q_new, t_new, off.from_frame, off.to_frame))
    else:
        # map the body-frame twist into the linkage chain base frame
        inv_mount_rot = geo.quat_conj(linkage.mount.rotation)
        v_cb = np.array(geo.quat_rotate(inv_mount_rot, (v[0], v[1], v[2])))
        w_cb = np.array(geo.quat_rotate(inv_mount_rot, (w[0], w[1], w[2])))
        fk = kin.forward_kinematics(linkage.chain, linkage.q)
        q_rot, t_new = _advance_pose(fk.rotation, fk.translation, v_cb, w_cb, dt)
        target = Transform(q_rot, t_new, fk.from_frame, fk.to_frame)
        cfg = ik_cfg or servo_mod.ServoConfig()
        # unit gain over dt turns the positional step into a velocity command
        cfg = replace(cfg, position_gain=1.0 / dt, control_period=min(cfg.control_period, dt),
                      time_constant=max(cfg.time_constant, dt))
        q_new = servo_mod.ik_step(linkage.chain, linkage.q, target, cfg, dt)
        new_linkage = replace(linkage, q=q_new)
    return replace(state, linkage=new_linkage, gripper=cmd.gripper)


def attach(state: VirtualLimbState, point: AttachmentPoint, body_pose: Transform,
           mode: str = PRESERVE_WORLD) -> VirtualLimbState:
    """Attach (or re-attach) to `point`, whose current world pose is `body_pose`.

    `preserve_linkage` keeps the linkage and lets the world pose jump;
    `preserve_world` recomputes the linkage so the world pose is
    continuous at the switch instant.
    """
    if body_pose.from_frame != point.body_frame:
        raise UnknownFrame(
            f"body pose is for frame {body_pose.from_frame!r}, attaching to {point.body_frame!r}"
        )
    if mode not in (PRESERVE_WORLD, PRESERVE_LINKAGE):
        raise DomainError(f"unknown attach mode {mode!r}")
    linkage = state.linkage
    if mode == PRESERVE_WORLD:
        # linkage that reproduces the frozen/current world pose exactly
        desired = geo.compose(geo.reframed(state.last_world_pose, EFFECTOR_FRAME, body_pose.to_frame),
                              geo.inverse(body_pose))
        if isinstance(linkage, FixedLinkage):
            linkage = FixedLinkage(desired)
        else:
            fk = kin.forward_kinematics(linkage.chain, linkage.q)
            mount = geo.compose(geo.inverse(geo.reframed(fk, EFFECTOR_FRAME, "linkage_base")),
                                geo.reframed(desired, EFFECTOR_FRAME, point.body_frame))
            linkage = replace(linkage, mount=mount)
    new_pose = linkage_pose(linkage, point.body_frame)
    world = virtual_effector_world(new_pose, body_pose)
    return replace(state, attachment=point, linkage=linkage, last_world_pose=world)


def detach(state: VirtualLimbState) -> VirtualLimbState:
    """Freeze the current world pose; body motion no longer moves the target."""
    if not state.attached:
        raise Detached("already detached")
    return replace(state, attachment=None)


def update_world_pose(state: VirtualLimbState, body_pose: Transform) -> VirtualLimbState:
    """Per-tick refresh of the effector world pose from the sensed body pose."""
    if not state.attached:
        return state
    pose = linkage_pose(state.linkage, state.attachment.body_frame)
    return replace(state, last_world_pose=virtual_effector_world(pose, body_pose))
