"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is valid."""


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    ``achieved`` carries the best error estimate reached, ``best`` the
    best-so-far result when one exists.
    """

    def __init__(self, message, achieved=None, best=None):
        super().__init__(message)
        self.achieved = achieved
        self.best = best


class CutoffLeakageError(RuntimeError):
    """Population escaped past the level cutoff of a discrete simulation."""


class ConfigError(ValueError):
    """A run configuration failed schema validation."""


class DataError(ValueError):
    """A data file could not be parsed or failed validation."""
