"""Exception hierarchy shared across the package."""


class CalipersError(Exception):
    """Base class for all errors raised by this package."""


class ClockStateError(CalipersError):
    """A clock or timer operation was attempted in the wrong state."""


class DuplicateNameError(CalipersError):
    """A clock backend or timer name is already registered."""


class UnknownNameError(CalipersError, KeyError):
    """A lookup by name or handle found nothing."""

    def __str__(self):  # KeyError quotes its argument; keep the plain message
        return Exception.__str__(self)


class ValueArityError(CalipersError):
    """A value vector does not match the backend's declared arity."""


class SnapshotFormatError(CalipersError):
    """An exported timer snapshot could not be parsed back."""


class PolicyError(CalipersError):
    """A checkpoint policy is malformed or internally inconsistent."""


class CheckpointFileError(CalipersError):
    """A checkpoint file could not be written or read back."""


class CheckpointCorruptError(CheckpointFileError):
    """A checkpoint file failed integrity checks (magic, length, checksum)."""


class CheckpointVersionError(CheckpointFileError):
    """A checkpoint file has an unsupported format version."""


class ConfigError(CalipersError):
    """A parameter file is malformed or contains unknown keys."""


class CalibrationError(CalipersError):
    """Cost calibration could not reach the requested target."""


class ModelMismatchError(CalipersError):
    """Two runs or a checkpoint and a run use different workload models."""
