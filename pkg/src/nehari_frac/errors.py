"""Exception types shared across the package."""


class NehariFracError(Exception):
    """Base class for all package-specific errors."""


class GridTooLargeError(NehariFracError):
    """Pair storage for the requested lattice exceeds the configured cap."""


class ZeroPairError(NehariFracError):
    """Raised when a fibering operation receives the zero pair."""


class ConvergenceError(NehariFracError):
    """An iterative solver exhausted its budget.

    The last iterate is attached so callers can inspect or restart.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateDirectionError(NehariFracError):
    """The implicit-map denominator is too close to zero (N0-degenerate)."""


class SupportError(NehariFracError):
    """A bubble support ball does not fit inside the interior region."""


class BranchLostError(NehariFracError):
    """Descent left the two-root regime (coupling above the Psi threshold)."""


class ConfigError(NehariFracError):
    """User-facing configuration problem; maps to CLI exit code 2."""
