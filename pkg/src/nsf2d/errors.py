"""Exception types shared across the package."""


class NSF2DError(Exception):
    """Base class for solver errors."""


class ConfigError(NSF2DError):
    """Bad or missing configuration input."""


class DomainError(NSF2DError):
    """Argument outside the mathematical domain of an operation."""


class ShapeError(NSF2DError):
    """Field shape does not match the grid."""


class PhiOverflowError(NSF2DError):
    """Kirchhoff transform evaluated beyond its overflow cap."""

    def __init__(self, zmax, cap):
        super().__init__(f"|z| = {zmax:g} exceeds the transform cap {cap:g}")
        self.zmax = zmax
        self.cap = cap


class SchemeViolationError(NSF2DError):
    """A structural property of the scheme (positivity, bounds) failed."""


class NonConvergenceError(NSF2DError):
    """Iterative solve did not reach its tolerance; carries the trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class LinearSolveError(NSF2DError):
    """Linear system residual above the requested tolerance."""
