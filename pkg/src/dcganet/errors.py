"""Exception hierarchy shared across the package."""


class DcgaError(Exception):
    """Base class for all package errors."""


class ShapeError(DcgaError, ValueError):
    """Tensor dimensions incompatible with the requested operation."""


class ConfigurationError(DcgaError, ValueError):
    """A config value violates an invariant (bad kernel spec, empty grid, ...)."""


class DatasetError(DcgaError, ValueError):
    """Dataset directory malformed or inconsistent."""


class TrainingError(DcgaError, RuntimeError):
    """Numeric failure during training (NaN loss / gradients)."""


class TapeUsageError(DcgaError, RuntimeError):
    """Autograd tape misused (backward on empty tape, non-scalar loss)."""
