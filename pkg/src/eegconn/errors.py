"""Exception types shared across the package."""


class EegConnError(Exception):
    """Base class for all package errors."""


class ParseError(EegConnError, ValueError):
    """Malformed text input (bad numeric token, bad manifest row)."""


class ValidationError(EegConnError, ValueError):
    """Structurally valid input that violates a domain invariant."""


class ShapeError(EegConnError, ValueError):
    """Array dimensions incompatible with the requested operation."""


class SingularDesignError(EegConnError, ValueError):
    """Least-squares design matrix is rank deficient or ill conditioned."""


class DegenerateColumnError(EegConnError, ValueError):
    """A transfer-matrix column has zero norm at some frequency."""


class TrainingDivergedError(EegConnError, RuntimeError):
    """Validation loss became non-finite during training."""


class ConfigError(EegConnError, ValueError):
    """Bad run-configuration file."""


class ChecksumError(EegConnError, ValueError):
    """Binary container failed its integrity check."""
