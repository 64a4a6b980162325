"""Exception types shared across the package."""


class ChevronError(Exception):
    """Base class for all package errors."""


class ParamsError(ChevronError):
    """Invalid physical or numerical parameters."""


class InvalidThickness(ParamsError):
    """Layer thicknesses outside the geometrically meaningful range."""


class ParamOutOfRange(ParamsError):
    """A named parameter violates its admissible range."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class NonPositiveCoefficient(ParamOutOfRange):
    """An energy coefficient that must be strictly positive is not."""


class RhoOutOfRange(ParamOutOfRange):
    """Regularization weight outside [0, 1)."""

    def __init__(self, message: str):
        super().__init__("rho", message)


class RealizabilityViolated(ParamsError):
    """cos(theta) * sqrt(1 + b^2) > 1: no unit director with the required tilt exists."""


class GridTooCoarse(ChevronError):
    """Grid resolution below the supported minimum."""


class NonFiniteEnergy(ChevronError):
    """An energy integrand evaluated to inf or nan."""


class NonFiniteGradient(ChevronError):
    """A gradient component evaluated to inf or nan."""


class LineSearchStalled(ChevronError):
    """Backtracking found no acceptable step above the minimum step size.

    Carries the best state reached so far in ``state``.
    """

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class MismatchedGrids(ChevronError):
    """Operation combining states that do not share a grid."""


class ParseError(ChevronError):
    """Config file could not be parsed; ``line`` is the 1-based offending line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ChevronError):
    """Config parsed but a field failed validation; ``field`` names it."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class MissingArtifact(ChevronError):
    """A required run artifact is absent or empty."""
