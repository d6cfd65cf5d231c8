"""Deterministic fixed-timestep scenario engine.

Per-tick pipeline (order is part of the contract): evaluate the body
trajectory, sense the body pose, apply commands and events due at this
tick, integrate the held auxiliary twist, refresh the virtual-effector
world pose, run the servo (every control period), record. The same
`Engine` drives batch runs and the live service; batch scripts and live
client messages go through the identical tick-boundary scheduling, so
identical command streams give identical state trajectories.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import geometry as geo
from . import kinematics as kin
from . import sensing as sens
from . import servo as servo_mod
from . import virtual_limb as vl
from .errors import ConfigError, DomainError, UnknownFrame
from .geometry import Transform
from .logio import SimLog
from .scenario import Scenario
from .servo import ServoConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trajectory:
    duration: float
    initial: np.ndarray
    sinusoids: tuple[tuple[int, float, float, float], ...]
    waypoints: tuple[tuple[float, np.ndarray], ...]


def eval_trajectory(traj: Trajectory, t: float) -> np.ndarray:
    """Human joint vector at time t (sinusoid terms over a waypoint base)."""
    if not -1e-12 <= t <= traj.duration + 1e-12:
        raise DomainError(f"trajectory time {t} outside [0, {traj.duration}]")
    wps = traj.waypoints
    if not wps:
        q = traj.initial.copy()
    elif t <= wps[0][0]:
        q = wps[0][1].copy()
    elif t >= wps[-1][0]:
        q = wps[-1][1].copy()
    else:
        q = None
        for (t0, q0), (t1, q1) in zip(wps, wps[1:]):
            if t0 <= t <= t1:
                s = (t - t0) / (t1 - t0)
                q = q0 + s * (q1 - q0)
                break
        assert q is not None
    for joint, amp, freq, phase in traj.sinusoids:
        q[joint] += amp * math.sin(2.0 * math.pi * freq * t + phase)
    return q


@dataclass(frozen=True)
class TickRow:
    tick: int
    t: float
    body_q: np.ndarray
    ehw: Transform
    link: Transform
    ear: Transform
    filt: Transform
    robot_q: np.ndarray
    erw: Transform
    err_trans: float
    err_rot: float
    attached: bool
    unreachable: bool
    singular: bool
    gripper: bool
    attach_epoch: int


def _time_to_tick(t: float, dt: float) -> int:
    return max(0, math.ceil(t / dt - 1e-9))


class Engine:
    """Steppable simulation; `step()` produces the row for the next tick
    (the first call yields the initial row at t = 0)."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.dt = scenario.dt
        body_doc = scenario.human.body
        self.body = kin.BodyModel(body_doc.trunk, body_doc.upper_arm, body_doc.forearm,
                                  body_doc.neck, body_doc.shoulder_offset)
        self.human = kin.standard_human(self.body)
        self.robot = scenario.robot.chain.build() if scenario.robot.chain else kin.standard_manipulator()
        self.base_pose = scenario.robot.base_pose.build(self.robot.base_frame, geo.WORLD)
        if scenario.robot.initial_q is not None:
            q0 = np.asarray(scenario.robot.initial_q, float)
        elif scenario.robot.chain is None:
            q0 = np.array(kin.MANIPULATOR_HOME)
        else:
            q0 = np.zeros(self.robot.dof)
        sv = scenario.servo
        self.cfg = ServoConfig(sv.control_period, sv.time_constant, sv.dls_damping,
                               sv.max_joint_velocity, sv.position_gain,
                               (sv.convergence_tol[0], sv.convergence_tol[1]))
        self.period_ticks = int(round(sv.control_period / scenario.dt))
        self.caps = vl.TwistCaps(scenario.twist_caps.linear, scenario.twist_caps.angular)
        self.root_pose = scenario.human.root_pose.build(self.human.root_frame, geo.WORLD)
        self.traj = Trajectory(
            scenario.duration,
            np.asarray(scenario.human.initial_q, float),
            tuple((s.joint, s.amplitude, s.frequency, s.phase)
                  for s in scenario.human.trajectory.sinusoids),
            tuple((w.t, np.asarray(w.q, float)) for w in scenario.human.trajectory.waypoints),
        )
        self.servo_state = servo_mod.initial_state(self.robot, q0, self.base_pose)
        self.limb: vl.VirtualLimbState | None = None
        self.attach_frame = scenario.attachment.frame
        self.epoch = 0
        self.held_twist = np.zeros(6)
        self.held_gripper = False
        self.tick = 0
        self._sense_cache: tuple[int, dict] | None = None
        self._frame_index = {f: i for i, f in enumerate(self.human.frame_names())}
        self._clamp_warned = False
        self._last_body_q: np.ndarray | None = None

        # scenario script -> tick-scheduled operations, stable order
        ops: list[tuple[int, int, tuple]] = []
        seq = 0
        for ev in scenario.events:
            k = _time_to_tick(ev.t, self.dt)
            if ev.action == "attach":
                ops.append((k, seq, ("attach", ev.frame, ev.mode or scenario.attachment.mode)))
            else:
                ops.append((k, seq, ("detach",)))
            seq += 1
        for cmd in scenario.aux_commands:
            k = _time_to_tick(cmd.t, self.dt)
            ops.append((k, seq, ("aux", tuple(cmd.twist), cmd.gripper)))
            seq += 1
        self._ops = sorted(ops, key=lambda o: (o[0], o[1]))
        self._next_seq = seq

    # -- command injection (shared by scenario scripts and the live bridge)

    def schedule(self, tick: int, op: tuple):
        """Queue an operation to run at the start of `tick` (>= current)."""
        if tick < self.tick:
            tick = self.tick
        self._ops.append((tick, self._next_seq, op))
        self._next_seq += 1
        self._ops.sort(key=lambda o: (o[0], o[1]))

    # -- sensing

    def _true_frames(self, body_q: np.ndarray) -> dict[str, Transform]:
        poses = self.human.frame_poses(body_q)
        return {f: geo.compose(p, self.root_pose) for f, p in poses.items()}

    def _sensed_frames(self, k: int, body_q: np.ndarray) -> dict[str, Transform]:
        if self._sense_cache is not None and self._sense_cache[0] == k:
            return self._sense_cache[1]
        sn = self.sc.sensing
        seed0 = self.sc.sensing_seed
        true = self._true_frames(body_q)
        t = k * self.dt
        if sn.backend == "mocap":
            sensed = {}
            for f, pose in true.items():
                sample = sens.mocap_measure(pose, sn.sigma_t, sn.sigma_r,
                                            (seed0, 0, k, self._frame_index[f]), timestamp=t)
                sensed[f] = sample.pose
        else:
            imus = sens.synthesize_imus(true, timestamp=t, sigma_r=sn.sigma_r,
                                        seed=(seed0, 1, k))
            head = sens.slam_head_pose(true["head"], sn.drift_rate, t, (seed0, 2))
            _, sensed = sens.reconstruct_upper_body(head, imus, self.body,
                                                    root_rotation=self.root_pose.rotation)
        self._sense_cache = (k, sensed)
        return sensed

    def _sensed(self, k: int, body_q: np.ndarray, frame: str) -> Transform:
        frames = self._sensed_frames(k, body_q)
        if frame not in frames:
            raise UnknownFrame(f"frame {frame!r} not available from the sensing backend")
        return frames[frame]

    # -- linkage construction

    def _initial_limb(self, body_pose: Transform) -> vl.VirtualLimbState:
        lk = self.sc.linkage
        point = vl.AttachmentPoint(self.attach_frame)
        if lk.type == "fixed":
            linkage: vl.Linkage = vl.FixedLinkage(
                lk.offset.build(vl.EFFECTOR_FRAME, self.attach_frame))
        else:
            chain = lk.chain.build()
            q = np.asarray(lk.initial_q, float) if lk.initial_q is not None else np.zeros(chain.dof)
            linkage = vl.ChainLinkage(chain, q, lk.mount.build(chain.base_frame, self.attach_frame))
        pose = vl.linkage_pose(linkage, self.attach_frame)
        world = vl.virtual_effector_world(pose, body_pose)
        return vl.VirtualLimbState(point, linkage, world)

    # -- stepping

    def _apply_ops(self, k: int, body_q: np.ndarray):
        while self._ops and self._ops[0][0] <= k:
            _, _, op = self._ops.pop(0)
            kind = op[0]
            if kind == "attach":
                frame, mode = op[1], op[2]
                body_pose = self._sensed(k, body_q, frame)
                self.limb = vl.attach(self.limb, vl.AttachmentPoint(frame), body_pose, mode)
                self.attach_frame = frame
                self.epoch += 1
            elif kind == "detach":
                if self.limb.attached:
                    self.limb = vl.detach(self.limb)
                    self.epoch += 1
            elif kind == "aux":
                self.held_twist = np.asarray(op[1], float)
                if op[2] is not None:
                    self.held_gripper = bool(op[2])
            elif kind == "gripper":
                self.held_gripper = bool(op[1])
                if self.limb.attached:
                    self.limb = replace(self.limb, gripper=self.held_gripper)
            elif kind == "set_config":
                self.cfg = replace(self.cfg, **op[1])
                self.period_ticks = max(1, int(round(self.cfg.control_period / self.dt)))
            else:
                raise ConfigError("<op>", f"unknown engine operation {kind!r}")

    def skeleton(self) -> dict:
        """Stick-figure points in world coordinates for display clients."""
        body_q = self._last_body_q if self._last_body_q is not None else self.traj.initial
        frames = self._true_frames(body_q)
        b = self.body

        def off(frame: str, local):
            pose = frames[frame]
            d = geo.quat_rotate(pose.rotation, local)
            t = pose.translation
            return [t[0] + d[0], t[1] + d[1], t[2] + d[2]]

        human = [
            {"name": "pelvis", "p": list(frames[self.human.root_frame].translation)},
            {"name": "trunk_top", "p": off("trunk", (0.0, 0.0, b.trunk))},
            {"name": "shoulder", "p": off("trunk", (0.0, b.shoulder_offset, b.trunk))},
            {"name": "elbow", "p": list(frames["forearm"].translation)},
            {"name": "hand", "p": list(frames["hand"].translation)},
            {"name": "head", "p": list(frames["head"].translation)},
        ]
        _, tip_t, joint_data = kin._fk_pass(self.robot, self.servo_state.q, collect=True)
        bq, bt = self.base_pose.rotation, self.base_pose.translation

        def to_world(p):
            d = geo.quat_rotate(bq, (p[0], p[1], p[2]))
            return [bt[0] + d[0], bt[1] + d[1], bt[2] + d[2]]

        robot = [list(bt)]
        robot += [to_world(origin) for origin, _, _ in joint_data]
        robot.append(to_world(tip_t))
        return {"human": human, "robot": robot}

    def step(self) -> TickRow:
        k = self.tick
        t = k * self.dt
        body_q = eval_trajectory(self.traj, min(t, self.traj.duration))
        clamped = self.human.clamp_q(body_q)
        if not self._clamp_warned and not np.array_equal(clamped, body_q):
            log.warning("human trajectory exceeds joint limits at t=%.3f; clamping", t)
            self._clamp_warned = True
        body_q = clamped
        self._last_body_q = body_q

        if self.limb is None:
            self.limb = self._initial_limb(self._sensed(k, body_q, self.attach_frame))
        self._apply_ops(k, body_q)

        if k > 0 and self.limb.attached:
            cmd = vl.AuxiliaryCommand(tuple(self.held_twist), self.held_gripper, t)
            self.limb = vl.apply_aux_command(self.limb, cmd, self.dt, self.caps, self.cfg)
        if self.limb.attached:
            self.limb = vl.update_world_pose(
                self.limb, self._sensed(k, body_q, self.limb.attachment.body_frame))

        raw_target = self.limb.last_world_pose
        if k > 0 and k % self.period_ticks == 0:
            self.servo_state = servo_mod.servo_tick(
                self.servo_state, self.robot, raw_target,
                self.cfg, self.cfg.control_period, self.base_pose)

        erw = geo.compose(kin.forward_kinematics(self.robot, self.servo_state.q),
                          self.base_pose)
        err_t, err_r = servo_mod.tracking_metrics(erw, raw_target)
        ehw_frame = self.limb.attachment.body_frame if self.limb.attached else self.attach_frame
        link_pose = vl.linkage_pose(self.limb.linkage, ehw_frame)

        row = TickRow(
            tick=k, t=t, body_q=body_q,
            ehw=self._sensed(k, body_q, ehw_frame),
            link=link_pose,
            ear=raw_target,
            filt=self.servo_state.filtered_target,
            robot_q=self.servo_state.q,
            erw=erw,
            err_trans=err_t, err_rot=err_r,
            attached=self.limb.attached,
            unreachable=self.servo_state.unreachable,
            singular=self.servo_state.singular,
            gripper=self.limb.gripper,
            attach_epoch=self.epoch,
        )
        self.tick += 1
        return row


def _pose7(t: Transform) -> list[float]:
    q, tr = t.rotation, t.translation
    return [q[0], q[1], q[2], q[3], tr[0], tr[1], tr[2]]


def run(scenario: Scenario) -> SimLog:
    """Run a scenario to completion and return the full log."""
    engine = Engine(scenario)
    n = int(math.floor(scenario.duration / scenario.dt + 1e-9)) + 1
    dof = engine.robot.dof
    out = SimLog(
        dt=scenario.dt,
        t=np.zeros(n),
        body_q=np.zeros((n, 9)),
        ehw=np.zeros((n, 7)), link=np.zeros((n, 7)), ear=np.zeros((n, 7)),
        filt=np.zeros((n, 7)),
        robot_q=np.zeros((n, dof)),
        erw=np.zeros((n, 7)),
        err_trans=np.zeros(n), err_rot=np.zeros(n),
        attached=np.zeros(n, np.int8), unreachable=np.zeros(n, np.int8),
        singular=np.zeros(n, np.int8), gripper=np.zeros(n, np.int8),
        display=np.full(n, int(scenario.display), np.int8),
        attach_epoch=np.zeros(n, np.int32),
    )
    for i in range(n):
        row = engine.step()
        out.t[i] = row.t
        out.body_q[i] = row.body_q
        out.ehw[i] = _pose7(row.ehw)
        out.link[i] = _pose7(row.link)
        out.ear[i] = _pose7(row.ear)
        out.filt[i] = _pose7(row.filt)
        out.robot_q[i] = row.robot_q
        out.erw[i] = _pose7(row.erw)
        out.err_trans[i] = row.err_trans
        out.err_rot[i] = row.err_rot
        out.attached[i] = int(row.attached)
        out.unreachable[i] = int(row.unreachable)
        out.singular[i] = int(row.singular)
        out.gripper[i] = int(row.gripper)
        out.attach_epoch[i] = row.attach_epoch
    return out
