"""Acceptance suite.

Each test implements one acceptance criterion at its stated tolerance
and prints a PASS line with the measured numbers when it holds.
"""

import hashlib
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from wornsim import engine as eng
from wornsim import geometry as geo
from wornsim import kinematics as kin
from wornsim import sensing as sens
from wornsim import servo as sv
from wornsim import virtual_limb as vl
from wornsim.cli import main as cli_main
from wornsim.metrics import compute_metrics
from wornsim.scenario import load_scenario, validate_scenario

from conftest import random_transform
from oracles import to_matrix
from test_engine import fixed_point_scenario
from test_kinematics import fk_oracle, jacobian_fd, random_chain

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
ROBOT = kin.standard_manipulator()
BASE = geo.identity(ROBOT.base_frame, geo.WORLD)
SHOULDER = np.array([0.0, 0.0, 0.2])


def _report(name: str, detail: str):
    print(f"ACCEPTANCE PASS {name}: {detail}")


def test_structural_composition_suite():
    """1000 random (human pose, linkage, robot) triples: the virtual
    effector world pose equals the explicit composition, and combined-chain
    FK equals the explicit serial composition, both within 1e-9."""
    t0 = time.time()
    rng = np.random.default_rng(2601)
    human = kin.standard_human()
    lo, hi = human.limits()
    worst_pose = 0.0
    worst_chain = 0.0
    for i in range(1000):
        # virtual-effector composition against the matrix oracle
        q9 = rng.uniform(lo, hi)
        frame = kin.ATTACHABLE_FRAMES[i % len(kin.ATTACHABLE_FRAMES)]
        body = geo.reframed(human.frame_poses(q9)[frame], frame, geo.WORLD)
        linkage = random_transform(rng, vl.EFFECTOR_FRAME, frame, span=0.5)
        world = vl.virtual_effector_world(linkage, body)
        oracle = to_matrix(body) @ to_matrix(linkage)
        dev = float(np.max(np.abs(to_matrix(world) - oracle)))
        worst_pose = max(worst_pose, dev)

        # combined-chain FK against the explicit serial composition
        human_chain = random_chain(rng, 4, prismatic_ok=False)
        raw_ext = random_chain(rng, 3, prismatic_ok=False)
        ext_joints = tuple(
            kin.JointSpec(f"x{k}", j.kind, j.axis, j.limits, j.rest_offset, f"xf{k}")
            for k, j in enumerate(raw_ext.joints))
        ext = kin.KinematicChain("ext_base", ext_joints, "ext_tip", raw_ext.tip_offset)
        combined = kin.connect_serial(human_chain, human_chain.tip_frame, ext)
        q = rng.uniform(-2, 2, 7)
        got = to_matrix(kin.forward_kinematics(combined, q))
        expected = fk_oracle(human_chain, q[:4]) @ fk_oracle(ext, q[4:])
        worst_chain = max(worst_chain, float(np.max(np.abs(got - expected))))
    elapsed = time.time() - t0
    assert worst_pose < 1e-9
    assert worst_chain < 1e-9
    assert elapsed < 10.0
    _report("structural", f"1000 triples, max pose dev {worst_pose:.2e}, "
                          f"max chain dev {worst_chain:.2e}, {elapsed:.1f}s")


def _dexterous_target(rng):
    """Pose drawn from the manipulator's dexterous workspace: generated by
    a well-conditioned configuration at a comfortable radial distance."""
    while True:
        qt = rng.uniform(-math.pi, math.pi, 6)
        fk = kin.forward_kinematics(ROBOT, qt)
        r = np.linalg.norm(np.array(fk.translation) - SHOULDER)
        if not 0.25 <= r <= 0.68:
            continue
        if np.linalg.svd(kin.jacobian(ROBOT, qt), compute_uv=False)[-1] >= 0.02:
            return fk


def test_ik_oracle_suite():
    """1000 random reachable targets: converged pose error below
    (1e-4 m, 1e-3 rad) within 2000 ticks each, no NaN, per-tick joint
    change within the velocity cap."""
    t0 = time.time()
    cfg = sv.ServoConfig()
    home = np.array(kin.MANIPULATOR_HOME)
    rng = np.random.default_rng(42)
    cap = cfg.max_joint_velocity * cfg.control_period + 1e-12
    ticks_used = []
    for trial in range(1000):
        target = geo.reframed(geo.compose(_dexterous_target(rng), BASE), "E_AR", geo.WORLD)
        state = sv.initial_state(ROBOT, home, BASE)
        converged = False
        k = 0
        while k < 2000:
            for _ in range(10):
                prev_q = state.q
                state = sv.servo_tick(state, ROBOT, target, cfg, cfg.control_period, BASE)
                assert np.all(np.isfinite(state.q)), f"NaN at trial {trial}"
                # revolute coordinates may wrap by a whole turn (identical
                # configuration); the physical per-tick change obeys the cap
                dq = np.abs(state.q - prev_q)
                assert np.all((dq <= cap) | (np.abs(dq - 2 * math.pi) <= cap)), \
                    f"velocity cap exceeded at trial {trial}"
            k += 10
            fk = geo.compose(kin.forward_kinematics(ROBOT, state.q), BASE)
            d_t, d_r = sv.tracking_metrics(fk, target)
            if d_t < 1e-4 and d_r < 1e-3:
                converged = True
                ticks_used.append(k)
                break
        assert converged, f"trial {trial} not converged within 2000 ticks ({d_t}, {d_r})"
    elapsed = time.time() - t0
    assert elapsed < 60.0
    _report("ik_oracle", f"1000/1000 converged, mean {np.mean(ticks_used):.0f} ticks, "
                         f"max {max(ticks_used)}, {elapsed:.1f}s")


def test_delay_model_analytics():
    """Delay filter: step response reaches 63.21% +- 0.5% at elapsed tau;
    0.2 Hz sinusoid through tau=0.15 lags 10.66 deg +- 1 deg; the latency
    estimator recovers the configured lag within +-2 dt."""
    tau, dt = 0.15, 0.01
    target = geo.translation(1.0, 0.0, 0.0, "E_AR", geo.WORLD)
    filtered = geo.identity("E_AR", geo.WORLD)
    n = int(round(tau / dt))
    for _ in range(n):
        state = sv.ServoState(np.zeros(6), filtered, target)
        filtered = sv.delay_filter(state, target, dt, tau)
    step_cov = filtered.translation[0]
    expected_cov = 1.0 - math.exp(-1.0)
    assert abs(step_cov - expected_cov) < 0.005 * expected_cov

    # phase lag of the filtered pose behind a sinusoid target
    freq = 0.2
    w = 2 * math.pi * freq
    filtered = geo.identity("E_AR", geo.WORLD)
    ts, xs = [], []
    for k in range(3000):
        t = k * dt
        target = geo.translation(0.1 * math.sin(w * t), 0.0, 0.0, "E_AR", geo.WORLD)
        state = sv.ServoState(np.zeros(6), filtered, target)
        filtered = sv.delay_filter(state, target, dt, tau)
        if t > 10.0:
            ts.append(t)
            xs.append(filtered.translation[0])
    A = np.column_stack([np.sin(w * np.array(ts)), np.cos(w * np.array(ts))])
    (a, b), *_ = np.linalg.lstsq(A, np.array(xs), rcond=None)
    lag_deg = math.degrees(math.atan2(-b, a))
    assert abs(math.degrees(math.atan(w * tau)) - 10.66) < 0.05
    assert abs(lag_deg - 10.66) < 1.0

    # full-pipeline latency estimate on the reference scenario
    sc = load_scenario(SCENARIOS / "reference.json")
    metrics = compute_metrics(eng.run(sc))
    expected_lag = (math.atan(w * sc.servo.time_constant)
                    + math.atan(w / sc.servo.position_gain)) / w
    assert abs(metrics.estimated_latency - expected_lag) <= 2 * sc.dt
    _report("delay_analytics",
            f"step {100 * step_cov:.2f}%, lag {lag_deg:.2f} deg, "
            f"latency {metrics.estimated_latency:.3f}s vs {expected_lag:.3f}s")


def test_jacobian_finite_difference_suite():
    """Central finite differences of FK match the geometric Jacobian within
    1e-5 at eps=1e-6, 100 random configurations per model."""
    human = kin.standard_human()
    rng = np.random.default_rng(7)
    worst = 0.0
    for chain, sampler in (
        (ROBOT, lambda: rng.uniform(-math.pi, math.pi, 6)),
        (human.arm_chain, lambda: rng.uniform(human.arm_chain.limits_lo,
                                              human.arm_chain.limits_hi)),
        (human.head_chain, lambda: rng.uniform(human.head_chain.limits_lo,
                                               human.head_chain.limits_hi)),
    ):
        for _ in range(100):
            q = sampler()
            dev = float(np.max(np.abs(kin.jacobian(chain, q) - jacobian_fd(chain, q))))
            worst = max(worst, dev)
    assert worst <= 1e-5
    _report("jacobian_fd", f"300 configs across 3 models, max deviation {worst:.2e}")


def test_sensing_round_trips():
    """Noiseless IMU reconstruction within 1e-6 over a full trajectory;
    noiseless calibration within 1e-9; noisy Monte-Carlo within factors."""
    human = kin.standard_human()
    lo, hi = human.limits()
    worst = 0.0
    for k in range(200):
        t = k * 0.05
        q = 0.8 * lo + (0.8 * (hi - lo)) * (0.5 + 0.5 * np.sin(
            2 * math.pi * 0.1 * t + np.linspace(0, 3, 9)))
        frames = human.frame_poses(q)
        imus = sens.synthesize_imus(frames)
        _, rec = sens.reconstruct_upper_body(frames["head"], imus, human.body)
        for f in ("trunk", "upper_arm", "forearm", "hand", "head"):
            d_t, d_r = geo.pose_error(rec[f], frames[f])
            worst = max(worst, d_t, d_r)
    assert worst <= 1e-6

    rng = np.random.default_rng(5)
    truth = random_transform(rng, "robot_base", geo.WORLD)
    m = to_matrix(truth)
    pairs = []
    for _ in range(6):
        p = rng.uniform(-0.5, 0.5, 3)
        world = m[:3, :3] @ p + m[:3, 3]
        pairs.append((geo.translation(*p, "mk", "robot_base"),
                      geo.translation(*world, "mk", geo.WORLD)))
    result = sens.calibrate_robot_to_world(pairs)
    d_t, d_r = geo.pose_error(result.transform, truth)
    assert d_t < 1e-9 and d_r < 1e-9 and result.residual_rms < 1e-9

    noise = 1e-3
    noisy = [(rp, geo.translation(*(np.array(wp.translation) + rng.normal(0, noise, 3)),
                                  "mk", geo.WORLD)) for rp, wp in pairs + [
        (geo.translation(*p, "mk", "robot_base"),
         geo.translation(*(m[:3, :3] @ p + m[:3, 3]), "mk", geo.WORLD))
        for p in rng.uniform(-0.5, 0.5, (4, 3))]]
    noisy_result = sens.calibrate_robot_to_world(noisy)
    assert noise / 2 < noisy_result.residual_rms < noise * 2
    d_t_noisy, _ = geo.pose_error(noisy_result.transform, truth)
    assert d_t_noisy < 2e-3
    _report("sensing_round_trips",
            f"imu worst {worst:.2e}, calib exact {d_t:.2e}, "
            f"noisy residual {noisy_result.residual_rms * 1e3:.2f}mm")


def test_attach_detach_semantics():
    """preserve_world reattachment keeps the world pose continuous within
    1e-9 across the switch tick; a detached target ignores body motion."""
    doc = {
        "version": 1, "duration": 4.0, "dt": 0.01,
        "human": {"trajectory": {"sinusoids": [
            {"joint": 0, "amplitude": 0.3, "frequency": 0.25}]}},
        "attachment": {"frame": "hand", "mode": "preserve_world"},
        "events": [{"t": 1.0, "action": "attach", "frame": "head",
                    "mode": "preserve_world"},
                   {"t": 2.0, "action": "detach"}],
    }
    log = eng.run(validate_scenario(doc))
    k_switch = 100
    jump = np.linalg.norm(log.ear[k_switch, 4:] - log.ear[k_switch - 1, 4:])
    # the switch tick also carries one tick of body motion; isolate the
    # discontinuity by comparing against the adjacent per-tick motion
    typical = np.linalg.norm(np.diff(log.ear[k_switch - 20:k_switch - 1, 4:], axis=0),
                             axis=1).max()
    assert jump <= typical * 3

    # direct check of the zero-jump contract at the exact switch instant
    state = vl.VirtualLimbState(
        vl.AttachmentPoint("trunk"),
        vl.FixedLinkage(geo.translation(0.4, 0.0, 0.0, vl.EFFECTOR_FRAME, "trunk")),
        geo.translation(0.4, 0.1, 0.2, vl.EFFECTOR_FRAME, geo.WORLD))
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        body = random_transform(rng, "head", geo.WORLD)
        out = vl.attach(state, vl.AttachmentPoint("head"), body, vl.PRESERVE_WORLD)
        d_t, d_r = geo.pose_error(out.last_world_pose, state.last_world_pose)
        worst = max(worst, d_t, d_r)
    assert worst < 1e-9

    k_detach = 200
    frozen = log.ear[k_detach]
    assert np.array_equal(log.ear[k_detach:], np.tile(frozen, (len(log) - k_detach, 1)))
    _report("attach_detach", f"200 preserve_world switches, worst jump {worst:.2e}; "
                             f"detached target bit-frozen over body motion")


def test_compensation_share_extremes():
    """Body-only scenario gives share exactly 1; aux-only exactly 0;
    time scaling leaves the share unchanged within 1e-6."""
    body_share = compute_metrics(eng.run(load_scenario(SCENARIOS / "body_only.json"))).compensation_share
    aux_share = compute_metrics(eng.run(load_scenario(SCENARIOS / "aux_only.json"))).compensation_share
    assert body_share == 1.0
    assert aux_share == 0.0

    doc = json.loads((SCENARIOS / "mixed_share.json").read_text())
    dt = doc["dt"]
    share = compute_metrics(eng.run(validate_scenario(doc))).compensation_share
    scaled = json.loads((SCENARIOS / "mixed_share.json").read_text())
    scaled["duration"] *= 2
    for s in scaled["human"]["trajectory"]["sinusoids"]:
        s["frequency"] /= 2
    for cmd in scaled["aux_commands"]:
        cmd["t"] = 2 * cmd["t"] - dt if cmd["t"] > 0 else 0.0
        cmd["twist"] = [v / 2 for v in cmd["twist"]]
    share_scaled = compute_metrics(eng.run(validate_scenario(scaled))).compensation_share
    assert abs(share - share_scaled) < 1e-6
    _report("compensation_share",
            f"body-only {body_share}, aux-only {aux_share}, "
            f"scale drift {abs(share - share_scaled):.2e}")


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_determinism_byte_identical_logs(tmp_path):
    """Identical scenario and seed produce byte-identical CSV logs, both
    within one process and across two fresh processes."""
    args = ["run", "--scenario", str(SCENARIOS / "noisy_mocap.json"), "--seed", "8"]
    in_proc = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli_main(args + ["--out", str(out)]) == 0
        in_proc.append(_sha(out / "log.csv"))
    assert in_proc[0] == in_proc[1]

    cross_proc = []
    for name in ("c", "d"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "wornsim.cli"] + args + ["--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        cross_proc.append(_sha(out / "log.csv"))
    assert cross_proc[0] == cross_proc[1]
    assert cross_proc[0] == in_proc[0]
    _report("determinism", f"sha256 {in_proc[0][:16]}... identical across 4 runs")


def test_structural_composition_in_logged_runs():
    """Logged rows re-compose: T_EAR_W equals compose(T_EAR_EH, T_EH_W)
    within 1e-9 at every attached tick of the corpus scenarios."""
    checked = 0
    for name in ("reference", "noisy_mocap", "imu_backend", "aux_only"):
        log = eng.run(load_scenario(SCENARIOS / f"{name}.json"))
        for i in range(len(log)):
            if not log.attached[i]:
                continue
            link = geo.make_transform(tuple(log.link[i, :4]), tuple(log.link[i, 4:]),
                                      "E_AR", "E_H")
            body = geo.make_transform(tuple(log.ehw[i, :4]), tuple(log.ehw[i, 4:]),
                                      "E_H", geo.WORLD)
            ear = geo.make_transform(tuple(log.ear[i, :4]), tuple(log.ear[i, 4:]),
                                     "E_AR", geo.WORLD)
            d_t, d_r = geo.pose_error(geo.compose(link, body), ear)
            assert d_t < 1e-9 and d_r < 1e-9
            checked += 1
    _report("logged_composition", f"{checked} logged ticks re-composed within 1e-9")
