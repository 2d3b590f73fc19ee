"""Exception types raised across the package."""


class CalmedNSError(Exception):
    """Base class for package errors."""


class GridMismatchError(CalmedNSError, ValueError):
    """Two fields (or a field and a sample array) live on different grids."""


class InsufficientHorizonError(CalmedNSError):
    """A noise path does not cover the time window an operation needs."""


class BlowUpError(CalmedNSError, FloatingPointError):
    """Non-finite state encountered during time stepping."""

    def __init__(self, t, message=None):
        self.t = float(t)
        super().__init__(message or f"non-finite state at t={self.t:.6g}")


class TheoryRangeError(CalmedNSError):
    """Parameters fall outside the regime where the estimates apply (kappa <= 0)."""


class ConfigError(CalmedNSError, ValueError):
    """Invalid run configuration; carries every problem found, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class CheckpointError(CalmedNSError):
    """Snapshot or checkpoint refused (bad magic, version, hash or header)."""
