"""Exception types shared across the package."""


class AqcfError(Exception):
    """Base class for all package-specific errors."""


class CapacityError(AqcfError, ValueError):
    """Requested simulation size exceeds the supported qubit range."""


class InvalidInputError(AqcfError, ValueError):
    """Input data violates a documented precondition (NaN, Inf, empty, ...)."""


class DimensionError(AqcfError, ValueError):
    """Shapes of two operands are incompatible."""

    def __init__(self, message, shape_a=None, shape_b=None):
        if shape_a is not None or shape_b is not None:
            message = f"{message} (got {shape_a} vs {shape_b})"
        super().__init__(message)


class NotDifferentiableError(AqcfError, ValueError):
    """A gradient was requested for a parameter-free operation."""


class StaleGraphError(AqcfError, RuntimeError):
    """backward() was called twice on the same computation graph."""


class OracleInvalidError(AqcfError, RuntimeError):
    """A finite-difference oracle detected a non-deterministic function."""


class ConfigError(AqcfError, ValueError):
    """Run configuration is missing, malformed, or inconsistent."""


class DataError(AqcfError, ValueError):
    """Dataset file is malformed or violates the format contract."""
