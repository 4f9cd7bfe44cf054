"""Exception types shared across the package."""


class AdvDropError(Exception):
    """Base class for all package errors."""


class ShapeError(AdvDropError, ValueError):
    pass


class DomainError(AdvDropError, ValueError):
    pass


class StaleTraceError(AdvDropError, RuntimeError):
    """A forward trace was recorded against an older parameter version."""


class ConfigurationError(AdvDropError, ValueError):
    pass


class FormatError(AdvDropError, ValueError):
    pass


class ConsistencyError(AdvDropError, ValueError):
    pass


class TrainingDiverged(AdvDropError, RuntimeError):
    """Raised when a non-finite loss shows up during training."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
