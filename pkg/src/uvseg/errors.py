"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: invalid input or bad
configuration -> 2, numerical failure during training -> 3, artifact
mismatch (checkpoint/shape) -> 4.
"""


class UvsegError(Exception):
    """Base class for all package errors."""


class InvalidInputError(UvsegError, ValueError):
    """Caller passed data that violates an operation's preconditions."""


class ConfigError(UvsegError, ValueError):
    """Configuration is inconsistent with itself or with model weights."""


class TrainingDivergedError(UvsegError, RuntimeError):
    """Training produced a non-finite loss; carries a diagnostic record."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record or {}


class ArtifactMismatchError(UvsegError, RuntimeError):
    """A stored artifact (checkpoint, mask file) does not fit the request."""


class WeightsUnavailableError(UvsegError, RuntimeError):
    """Pretrained weights (or their loader package) are not available."""
