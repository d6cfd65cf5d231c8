"""Exception types shared across the simulator."""


class WornsimError(Exception):
    """Base class for all simulator errors."""


class FrameMismatch(WornsimError):
    """Two transforms were combined with incompatible frame labels."""


class DomainError(WornsimError):
    """A scalar argument is outside its valid domain."""


class DimensionMismatch(WornsimError):
    """A joint vector does not match the chain it is used with."""


class UnknownFrame(WornsimError):
    """A frame name does not exist in the referenced chain or model."""


class Detached(WornsimError):
    """An operation requires the virtual limb to be attached (or detached)."""


class MissingSegment(WornsimError):
    """An IMU sample for a modeled body segment is absent."""


class DegenerateGeometry(WornsimError):
    """Point correspondences are insufficient or collinear."""


class ConfigError(WornsimError):
    """A scenario or config document failed validation.

    `field` holds the dotted path of the offending entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class EmptyLog(WornsimError):
    """Metrics were requested for a log with no rows."""


class DecodeError(WornsimError):
    """A wire message failed to decode.

    `field` names the offending field.
    """

    def __init__(self, field: str, message: str = "invalid or missing"):
        self.field = field
        super().__init__(f"{field}: {message}")
