"""wornsim: a deterministic simulator of a virtually worn robotic arm.

A virtual arm rigidly attached to a moving human body frame defines a
target pose; a deported serial manipulator tracks it through a
delay-inducing control law. Batch runs produce per-tick logs and
tracking/latency/compensation metrics; a live WebSocket bridge lets an
interactive client steer the virtual limb in real time.
"""

from . import (  # noqa: F401
    engine,
    geometry,
    kinematics,
    logio,
    metrics,
    scenario,
    sensing,
    servo,
    virtual_limb,
)
from .errors import WornsimError  # noqa: F401

__version__ = "0.1.0"
