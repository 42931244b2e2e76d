"""Exception types shared across the package."""


class ObstacleLabError(Exception):
    """Base class for all package errors."""


class InvalidResolutionError(ObstacleLabError, ValueError):
    """Grid resolution below the supported minimum."""


class DomainError(ObstacleLabError, ValueError):
    """Geometric or value-range precondition violated (ball outside the disk,
    negative weight, non-unit boundary data, shift leaving the domain, ...)."""


class GridMismatchError(ObstacleLabError, ValueError):
    """Operands live on different grids or have incompatible channel counts."""


class NonConvergenceError(ObstacleLabError, RuntimeError):
    """A solver exhausted its iteration budget above tolerance.

    Carries whatever diagnostic the solver had at the point of failure so a
    caller can inspect or persist the partial state.
    """

    def __init__(self, message, *, report=None, history=None, context=None, partial=None):
        super().__init__(message)
        self.report = report
        self.history = history
        self.context = context
        self.partial = partial
