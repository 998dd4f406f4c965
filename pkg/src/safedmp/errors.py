"""Exception types shared across the package."""


class SafeDmpError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SafeDmpError, ValueError):
    """Input data violates a documented precondition."""


class DimensionError(InvalidInputError):
    """Vector or trajectory dimension does not match what the operation needs."""


class InsufficientDataError(InvalidInputError):
    """Too few samples to perform the requested fit or differentiation."""


class DegeneratePhaseError(SafeDmpError):
    """Basis activations do not cover the queried phase value."""


class PhaseStepError(SafeDmpError):
    """Discrete phase update would cross zero; reduce the step size."""


class TubeDomainError(SafeDmpError, ValueError):
    """Normalized tube error is outside (-1, 1); clip before transforming."""


class InvalidTubeError(SafeDmpError, ValueError):
    """Tube bounds are degenerate (upper bound not above lower bound)."""


class SafetyInfeasibleError(SafeDmpError):
    """No collision-free projection exists for the requested target."""


class UndefinedMetricError(SafeDmpError):
    """Metric is undefined for the given execution logs."""


class ParseError(SafeDmpError):
    """A file could not be parsed; carries the offending line when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
