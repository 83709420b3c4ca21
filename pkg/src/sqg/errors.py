"""Exception types shared across the package."""


class SQGError(Exception):
    """Base class for all package errors."""


class SymmetryError(SQGError, ValueError):
    """Coefficient array does not describe a real-valued field."""


class ConfigurationError(SQGError, ValueError):
    """Grid, solver or run configuration is unusable."""


class DomainError(SQGError, ValueError):
    """A parameter lies outside the range an operation admits."""


class InsufficientDataError(SQGError, ValueError):
    """Not enough snapshots or samples for the requested computation."""


class PreconditionError(SQGError, ValueError):
    """An input violates a mathematical precondition (e.g. non-solenoidal velocity)."""


class BlowupDetected(SQGError, RuntimeError):
    """Raised by the stepper when the state becomes non-finite.

    ``last_time`` carries the last time at which the state was finite.
    """

    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time


class CheckpointError(SQGError, ValueError):
    """Checkpoint file is malformed (bad magic, version, size) or incompatible."""
