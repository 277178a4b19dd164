"""Exception hierarchy shared by all modules."""


class SinelabError(Exception):
    """Base class; ``exit_code`` is used by the command line."""

    exit_code = 10


class DomainError(SinelabError, ValueError):
    exit_code = 11


class TailTruncationError(SinelabError):
    """A sampled function or spectrum has not decayed at the grid ends."""

    exit_code = 12


class RangeError(SinelabError, ValueError):
    exit_code = 13


class ResolutionError(SinelabError):
    """Discretization too coarse, or a result moved under refinement."""

    exit_code = 14


class DegeneracyError(SinelabError):
    """Eigenvalues or conditional densities left their admissible range."""

    exit_code = 15


class ConditioningError(SinelabError):
    exit_code = 16


class OverflowGuardError(SinelabError):
    exit_code = 17


class ConsistencyError(SinelabError):
    """Two independent routes to the same quantity disagree."""

    exit_code = 18


class SpectralTailWarning(UserWarning):
    """Weighted spectrum still non-negligible at the edge of the grid."""
