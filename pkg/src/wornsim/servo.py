"""Tracking controller for the deported manipulator.

The end-effector follows the virtual effector through two stages: a
first-order pose lag (the delay model, time constant `time_constant`)
and a damped-least-squares velocity IK step driven by a proportional
pose error. Both stages are pure step functions of (state, inputs).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from . import kinematics as kin
from .errors import DomainError, FrameMismatch
from .geometry import Transform
from .kinematics import KinematicChain

log = logging.getLogger(__name__)

SINGULARITY_THRESHOLD = 1e-6

# hysteresis band for the singularity-escape mode: after the controller has
# been stuck near-singular with persistent pose error for STALL_TICKS
# consecutive steps, it climbs the manipulability gradient until the
# smallest structural singular value recovers past ESCAPE_OFF
ESCAPE_ON_SIGMA = 0.008
ESCAPE_OFF_SIGMA = 0.02
STALL_TICKS = 50
_ESCAPE_GRAD_STEP = 1e-5


@dataclass(frozen=True)
class ServoConfig:
    control_period: float = 0.01
    time_constant: float = 0.15
    dls_damping: float = 0.05
    max_joint_velocity: float = 1.0
    position_gain: float = 8.0
    convergence_tol: tuple[float, float] = (1e-4, 1e-3)

    def __post_init__(self):
        for name in ("control_period", "time_constant", "dls_damping",
                     "max_joint_velocity", "position_gain"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"servo.{name} must be positive")
        if self.convergence_tol[0] <= 0.0 or self.convergence_tol[1] <= 0.0:
            raise DomainError("servo.convergence_tol entries must be positive")
        if self.control_period > self.time_constant:
            raise DomainError("servo.control_period must not exceed servo.time_constant")


@dataclass(frozen=True)
class ServoState:
    """Joint vector plus the delay filter's internal pose state (world frame).

    `escaping` latches while the controller is climbing out of a singular
    fold (see _ik_step_impl); it is control state, not a health flag.
    """

    q: np.ndarray
    filtered_target: Transform
    raw_target: Transform
    singular: bool = False
    unreachable: bool = False
    escaping: bool = False
    stall_ticks: int = 0


def initial_state(chain: KinematicChain, q, base_pose: Transform) -> ServoState:
    """State whose filter starts at the current tool pose (no initial step)."""
    q = kin.check_dimension(chain, q)
    tool_world = geo.compose(kin.forward_kinematics(chain, q), base_pose)
    return ServoState(q=q, filtered_target=tool_world, raw_target=tool_world)


def delay_filter(state: ServoState, new_target: Transform, dt: float, tau: float) -> Transform:
    """First-order pose lag: exact discretization x <- x + (1 - e^(-dt/tau)) (u - x)."""
    if dt <= 0.0:
        raise DomainError(f"delay_filter dt must be positive, got {dt}")
    if tau <= 0.0:
        raise DomainError(f"delay_filter tau must be positive, got {tau}")
    alpha = 1.0 - math.exp(-dt / tau)
    current = geo.reframed(state.filtered_target, new_target.from_frame, new_target.to_frame)
    return geo.interpolate(current, new_target, alpha)


def _sigma_min(chain: KinematicChain, q: np.ndarray) -> float:
    _, tip_t, joint_data = kin._fk_pass(chain, q, collect=True)
    J = kin._jacobian_from_pass(tip_t, joint_data)
    return float(np.linalg.svd(J, compute_uv=False)[-1])


def _ik_step_impl(chain: KinematicChain, q: np.ndarray, target: Transform,
                  cfg: ServoConfig, dt: float,
                  escaping: bool = False,
                  stall_ticks: int = 0) -> tuple[np.ndarray, bool, bool, int]:
    acc_q, acc_t, joint_data = kin._fk_pass(chain, q, collect=True)
    kp = cfg.position_gain
    tt = target.translation
    rel = geo.quat_mul(target.rotation, geo.quat_conj(acc_q))
    # quaternion-feedback attitude error: continuous through the antipode,
    # first-order equal to the rotation vector near convergence
    rx, ry, rz = geo.quat_attitude_error(rel)
    ex, ey, ez = tt[0] - acc_t[0], tt[1] - acc_t[1], tt[2] - acc_t[2]
    err = np.array([kp * ex, kp * ey, kp * ez, kp * rx, kp * ry, kp * rz])
    J = kin._jacobian_from_pass(acc_t, joint_data)
    # damped least squares through the SVD: qdot = V diag(s/(s^2+l^2)) U^T e
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    smin = float(s[-1])
    # damping ramps in below a small conditioning knee; above it the update
    # is an exact least-squares step so weak directions keep full gain
    knee = 0.2 * cfg.dls_damping
    lam = cfg.dls_damping * max(0.0, 1.0 - smin / knee) if smin < knee else 0.0
    lam2 = lam * lam
    qdot = Vt.T @ ((s / (s * s + lam2)) * (U.T @ err))
    vmax = cfg.max_joint_velocity

    # singular-fold escape: once the controller has sat near-singular with
    # persistent pose error for STALL_TICKS steps, replace the task step
    # with pure manipulability-gradient ascent (nothing opposes the climb,
    # so conditioning recovers in finitely many ticks), then hand back.
    # Transient singular crossings during normal tracking never trip the
    # persistence counter.
    d_trans = math.sqrt(ex * ex + ey * ey + ez * ez)
    d_rot = geo.quat_angle(rel)
    # wide margin: a state this close to the target is converging on its
    # own and must never be thrown away by an escape
    converged = d_trans < 20.0 * cfg.convergence_tol[0] and d_rot < 20.0 * cfg.convergence_tol[1]
    stuck = chain.dof >= 6 and smin < ESCAPE_ON_SIGMA and not converged
    stall_ticks = stall_ticks + 1 if stuck else 0
    if escaping:
        escaping = smin < ESCAPE_OFF_SIGMA and not converged
    elif stall_ticks >= STALL_TICKS:
        escaping = True
    if escaping:
        grad = np.zeros(chain.dof)
        for j in range(chain.dof):
            q_probe = q.copy()
            q_probe[j] += _ESCAPE_GRAD_STEP
            grad[j] = (_sigma_min(chain, q_probe) - smin) / _ESCAPE_GRAD_STEP
        gn = float(np.linalg.norm(grad))
        if gn > 1e-12:
            qdot = grad * (vmax / gn)

    singular = bool(smin < SINGULARITY_THRESHOLD)
    if singular:
        log.warning("near-singular Jacobian (sigma_min < %.0e) on chain %s",
                    SINGULARITY_THRESHOLD, chain.base_frame)
    np.clip(qdot, -vmax, vmax, out=qdot)
    return kin.apply_limits(chain, q + qdot * dt), singular, escaping, stall_ticks


def ik_step(chain: KinematicChain, q, target: Transform, cfg: ServoConfig, dt: float) -> np.ndarray:
    """One damped-least-squares velocity IK step toward `target`.

    `target` must be expressed in the chain base frame (tip -> base).
    """
    if dt <= 0.0:
        raise DomainError(f"ik_step dt must be positive, got {dt}")
    q = kin.check_dimension(chain, q)
    q_new, _, _, _ = _ik_step_impl(chain, q, target, cfg, dt)
    return q_new


def servo_tick(state: ServoState, chain: KinematicChain, raw_target: Transform,
               cfg: ServoConfig, dt: float,
               base_pose: Transform | None = None) -> ServoState:
    """Delay filter then IK step; `raw_target` is the world-frame target pose.

    `base_pose` locates the chain base in the world (defaults to identity
    at `chain.base_frame`).
    """
    if base_pose is None:
        base_pose = geo.identity(chain.base_frame, geo.WORLD)
    filtered = delay_filter(state, raw_target, dt, cfg.time_constant)
    target_base = geo.reframed(geo.compose(filtered, geo.inverse(base_pose)),
                               chain.tip_frame, chain.base_frame)
    q_new, singular, escaping, stall = _ik_step_impl(chain, state.q, target_base, cfg, dt,
                                                     escaping=state.escaping,
                                                     stall_ticks=state.stall_ticks)
    tb = target_base.translation
    dist = math.sqrt(tb[0] * tb[0] + tb[1] * tb[1] + tb[2] * tb[2])
    return ServoState(q=q_new, filtered_target=filtered, raw_target=raw_target,
                      singular=singular, unreachable=dist > chain.reach_bound + 1e-12,
                      escaping=escaping, stall_ticks=stall)


def tracking_metrics(robot_pose: Transform, virtual_pose: Transform) -> tuple[float, float]:
    """Pose error between end-effector and virtual effector, both in the
    same reference frame (the from-frames legitimately differ)."""
    if robot_pose.to_frame != virtual_pose.to_frame:
        raise FrameMismatch(
            f"poses expressed in different frames: {robot_pose.to_frame} vs {virtual_pose.to_frame}"
        )
    return geo._pose_delta(robot_pose, virtual_pose)
