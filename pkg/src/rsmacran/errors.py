"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid scenario or generator parameters (non-positive counts, bad grids)."""


class ModelError(ValueError):
    """Physically inconsistent model input (e.g. coincident positions)."""


class UsageError(ValueError):
    """API precondition violated by the caller."""


class SolverError(RuntimeError):
    """Numerical failure inside the convex solver.

    Carries the last iterate so callers can inspect or restart.
    """

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate
