"""Per-tick simulation logs and their CSV / JSON-lines encodings.

Column order is fixed and documented here; pose columns are
[qw, qx, qy, qz, tx, ty, tz] matching the wire transform encoding.
Floats are written with shortest round-trip repr, so identical runs
produce byte-identical files.

    t,
    body_q0..body_q8,            human joint vector
    ehw_*,                       sensed attachment-frame pose E_H -> W
    link_*,                      virtual linkage pose E_AR -> E_H
    ear_*,                       raw virtual effector pose E_AR -> W
    filt_*,                      delay-filtered target pose (world)
    robot_q0..robot_q{n-1},      manipulator joint vector
    erw_*,                       end-effector pose E_R -> W
    err_trans, err_rot,          tracking error robot vs raw target
    attached, unreachable, singular, gripper, display,   0/1 flags
    attach_epoch                 increments at every attach/detach event
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyLog

_POSE_FIELDS = ("qw", "qx", "qy", "qz", "tx", "ty", "tz")
_POSE_BLOCKS = ("ehw", "link", "ear", "filt", "erw")
_FLAGS = ("attached", "unreachable", "singular", "gripper", "display")

HUMAN_DOF = 9


@dataclass
class SimLog:
    dt: float
    t: np.ndarray
    body_q: np.ndarray        # (n, 9)
    ehw: np.ndarray           # (n, 7)
    link: np.ndarray          # (n, 7)
    ear: np.ndarray           # (n, 7)
    filt: np.ndarray          # (n, 7)
    robot_q: np.ndarray       # (n, dof)
    erw: np.ndarray           # (n, 7)
    err_trans: np.ndarray
    err_rot: np.ndarray
    attached: np.ndarray
    unreachable: np.ndarray
    singular: np.ndarray
    gripper: np.ndarray
    display: np.ndarray
    attach_epoch: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def robot_dof(self) -> int:
        return self.robot_q.shape[1]

    def require_rows(self):
        if len(self) == 0:
            raise EmptyLog("log has no rows")


def header(robot_dof: int) -> list[str]:
    cols = ["t"]
    cols += [f"body_q{i}" for i in range(HUMAN_DOF)]
    for block in _POSE_BLOCKS[:4]:
        cols += [f"{block}_{f}" for f in _POSE_FIELDS]
    cols += [f"robot_q{i}" for i in range(robot_dof)]
    cols += [f"erw_{f}" for f in _POSE_FIELDS]
    cols += ["err_trans", "err_rot"]
    cols += list(_FLAGS)
    cols += ["attach_epoch"]
    return cols


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(log: SimLog, path: str | Path):
    lines = [",".join(header(log.robot_dof))]
    for i in range(len(log)):
        row = [_fmt(log.t[i])]
        row += [_fmt(v) for v in log.body_q[i]]
        for block in (log.ehw, log.link, log.ear, log.filt):
            row += [_fmt(v) for v in block[i]]
        row += [_fmt(v) for v in log.robot_q[i]]
        row += [_fmt(v) for v in log.erw[i]]
        row += [_fmt(log.err_trans[i]), _fmt(log.err_rot[i])]
        row += [str(int(log.attached[i])), str(int(log.unreachable[i])),
                str(int(log.singular[i])), str(int(log.gripper[i])),
                str(int(log.display[i]))]
        row += [str(int(log.attach_epoch[i]))]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _pose_dict(row: np.ndarray) -> dict:
    return {"q": [float(v) for v in row[:4]], "t": [float(v) for v in row[4:]]}


def write_jsonl(log: SimLog, path: str | Path):
    with open(path, "w") as fh:
        for i in range(len(log)):
            rec = {
                "t": float(log.t[i]),
                "body_q": [float(v) for v in log.body_q[i]],
                "ehw": _pose_dict(log.ehw[i]),
                "link": _pose_dict(log.link[i]),
                "ear": _pose_dict(log.ear[i]),
                "filt": _pose_dict(log.filt[i]),
                "robot_q": [float(v) for v in log.robot_q[i]],
                "erw": _pose_dict(log.erw[i]),
                "err_trans": float(log.err_trans[i]),
                "err_rot": float(log.err_rot[i]),
                "attached": int(log.attached[i]),
                "unreachable": int(log.unreachable[i]),
                "singular": int(log.singular[i]),
                "gripper": int(log.gripper[i]),
                "display": int(log.display[i]),
                "attach_epoch": int(log.attach_epoch[i]),
            }
            fh.write(json.dumps(rec) + "\n")


def read_csv(path: str | Path) -> SimLog:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise EmptyLog(f"{path}: empty file")
    cols = text[0].split(",")
    robot_dof = sum(1 for c in cols if c.startswith("robot_q"))
    expected = header(robot_dof)
    if cols != expected:
        raise EmptyLog(f"{path}: unexpected column layout")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    if data.size == 0:
        raise EmptyLog(f"{path}: no data rows")
    idx = {c: i for i, c in enumerate(cols)}

    def block(name):
        return data[:, [idx[f"{name}_{f}"] for f in _POSE_FIELDS]]

    n_dt = float(data[1, 0] - data[0, 0]) if len(data) > 1 else 0.0
    return SimLog(
        dt=n_dt,
        t=data[:, 0],
        body_q=data[:, [idx[f"body_q{i}"] for i in range(HUMAN_DOF)]],
        ehw=block("ehw"), link=block("link"), ear=block("ear"), filt=block("filt"),
        robot_q=data[:, [idx[f"robot_q{i}"] for i in range(robot_dof)]],
        erw=block("erw"),
        err_trans=data[:, idx["err_trans"]],
        err_rot=data[:, idx["err_rot"]],
        attached=data[:, idx["attached"]].astype(np.int8),
        unreachable=data[:, idx["unreachable"]].astype(np.int8),
        singular=data[:, idx["singular"]].astype(np.int8),
        gripper=data[:, idx["gripper"]].astype(np.int8),
        display=data[:, idx["display"]].astype(np.int8),
        attach_epoch=data[:, idx["attach_epoch"]].astype(np.int32),
    )
