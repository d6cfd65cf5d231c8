"""Wire messages for the live bridge.

Text frames carry one JSON object each. Client messages are validated
strictly (unknown fields rejected); decode failures name the offending
field. Transforms use the wire encoding {from, to, q: [w,x,y,z],
t: [x,y,z]}.
"""

from __future__ import annotations

import json
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..errors import DecodeError


class _Msg(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WireTransform(_Msg):
    from_frame: str = Field(alias="from")
    to_frame: str = Field(alias="to")
    q: list[float]
    t: list[float]

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# -- client -> server ---------------------------------------------------------

class AuxTwistMessage(_Msg):
    type: Literal["aux_twist"]
    twist: list[float]
    gripper: Optional[bool] = None
    apply_at_tick: Optional[int] = None


class AttachMessage(_Msg):
    type: Literal["attach"]
    frame: str
    mode: str = "preserve_world"
    apply_at_tick: Optional[int] = None


class DetachMessage(_Msg):
    type: Literal["detach"]
    apply_at_tick: Optional[int] = None


class GripperMessage(_Msg):
    type: Literal["gripper"]
    on: bool
    apply_at_tick: Optional[int] = None


class PauseMessage(_Msg):
    type: Literal["pause"]


class ResumeMessage(_Msg):
    type: Literal["resume"]


class SetConfigMessage(_Msg):
    type: Literal["set_config"]
    servo: dict
    apply_at_tick: Optional[int] = None


ClientMessage = Union[AuxTwistMessage, AttachMessage, DetachMessage,
                      GripperMessage, PauseMessage, ResumeMessage,
                      SetConfigMessage]

_CLIENT_TYPES = {
    "aux_twist": AuxTwistMessage,
    "attach": AttachMessage,
    "detach": DetachMessage,
    "gripper": GripperMessage,
    "pause": PauseMessage,
    "resume": ResumeMessage,
    "set_config": SetConfigMessage,
}


# -- server -> client ---------------------------------------------------------

class SnapshotPoses(_Msg):
    E_H: WireTransform
    E_AR_raw: WireTransform
    E_AR_filtered: WireTransform
    E_R: WireTransform


class SnapshotErrors(_Msg):
    d_trans: float
    d_rot: float


class SnapshotFlags(_Msg):
    attached: bool
    gripper: bool
    unreachable: bool
    singular: bool


class SkeletonPoint(_Msg):
    name: str
    p: list[float]


class Skeleton(_Msg):
    human: list[SkeletonPoint]
    robot: list[list[float]]


class SnapshotMessage(_Msg):
    type: Literal["snapshot"] = "snapshot"
    tick: int
    timestamp: float
    poses: SnapshotPoses
    robot_q: list[float]
    errors: SnapshotErrors
    flags: SnapshotFlags
    skeleton: Skeleton
    dropped: int = 0


class AckMessage(_Msg):
    type: Literal["ack"] = "ack"
    command: str
    tick: int


class ErrorMessage(_Msg):
    type: Literal["error"] = "error"
    detail: str


ServerMessage = Union[SnapshotMessage, AckMessage, ErrorMessage]


def decode_client(text: str) -> ClientMessage:
    """Parse and validate one client frame; raises DecodeError naming the
    offending field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        raise DecodeError("<frame>", "not valid JSON") from None
    if not isinstance(doc, dict):
        raise DecodeError("<frame>", "expected a JSON object")
    mtype = doc.get("type")
    if mtype is None:
        raise DecodeError("type", "missing")
    cls = _CLIENT_TYPES.get(mtype)
    if cls is None:
        raise DecodeError("type", f"unknown message type {mtype!r}")
    try:
        return cls.model_validate(doc)
    except ValidationError as e:
        err = e.errors()[0]
        field = ".".join(str(p) for p in err["loc"]) or "<frame>"
        raise DecodeError(field, err["msg"]) from None


def encode(msg: ServerMessage | ClientMessage) -> str:
    """Stable JSON encoding (field order fixed by the model)."""
    return json.dumps(msg.model_dump(by_alias=True, exclude_none=True))
