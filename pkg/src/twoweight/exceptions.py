"""Exception types raised across the package."""


class DegenerateMeasureError(ValueError):
    """No cube in the search family carries the mass needed for the estimate."""


class SingularEvaluationError(ValueError):
    """A kernel was evaluated on the diagonal x == y."""


class MisalignedGridError(ValueError):
    """Two grid objects do not share the same root cube and resolution."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    The last iterate and its estimate are attached so callers can still
    inspect them.
    """

    def __init__(self, message, estimate=None, iterate=None):
        super().__init__(message)
        self.estimate = estimate
        self.iterate = iterate


class ConfigError(ValueError):
    """An experiment configuration is missing, unreadable or invalid."""
