"""Exception hierarchy shared across the bus, codecs and pipeline nodes."""


class AttbusError(Exception):
    """Base class for all errors raised by this package."""


# --- wire codec ---

class InvariantViolation(AttbusError):
    """A message (or frame field) violates its declared invariants."""


class OversizedMessage(AttbusError):
    """Serialized frame would exceed the u32 length prefix."""


class Truncated(AttbusError):
    """Frame bytes end before the declared length."""


class UnknownTypeId(AttbusError):
    """Frame carries a type id this protocol does not define."""


class BodyLengthMismatch(AttbusError):
    """Frame body length is inconsistent with its declared contents."""


# --- bus / broker ---

class TypeConflict(AttbusError):
    """Topic is already bound to a different message type."""


class BindFailure(AttbusError):
    """Broker could not bind its listening socket."""


class CorruptBag(AttbusError):
    """Bag file is unreadable; carries the byte offset of the bad record."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class IoFailure(AttbusError):
    """Recording sink could not be written."""


# --- imaging / sources ---

class BadSigma(AttbusError):
    """Gaussian sigma out of the supported range for this image."""


class NoFramesFound(AttbusError):
    """Image-sequence directory matched no readable frames."""


class UnreadableFile(AttbusError):
    """A frame file exists but cannot be parsed; carries the path."""

    def __init__(self, path, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


# --- attention ---

class BadScales(AttbusError):
    """Center/surround pyramid levels are not usable."""


class TooSmall(AttbusError):
    """Input image is below the minimum size for this algorithm."""


class NonPowerOfTwo(AttbusError):
    """FFT input dimensions must be powers of two."""


# --- task layer ---

class WindowTooSmall(AttbusError):
    """Search window cannot contain the template."""


class BadBox(AttbusError):
    """Bounding box does not fit inside the frame."""


# --- config / eval ---

class ConfigError(AttbusError):
    """Pipeline config rejected; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ParseError(AttbusError):
    """Ground-truth CSV rejected; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OrderViolation(AttbusError):
    """Ground-truth frame indices not strictly increasing."""


class EmptyGroundTruth(AttbusError):
    """Metrics requested against an empty ground-truth set."""


class EmptyComparison(AttbusError):
    """Comparison requested with no algorithms."""
