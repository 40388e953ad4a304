"""Exception types shared across the package."""


class HpstepError(Exception):
    """Base class for all package-specific errors."""


class InvalidGridError(HpstepError):
    """Raised for degenerate collocation grids (p < 3, empty interval)."""


class OutOfDomainError(HpstepError):
    """Raised when an interpolation query lies outside the grid domain."""


class SingularMatrixError(HpstepError):
    """A dense factorization hit a pivot below the singularity tolerance.

    ``context`` identifies the offending object (for instance a tree node)
    when the caller supplied one.
    """

    def __init__(self, message, context=None):
        if context is not None:
            message = f"{message} [{context}]"
        super().__init__(message)
        self.context = context


class EigenConvergenceError(HpstepError):
    """The dense eigensolver failed to converge."""


class UnsupportedPartitionError(HpstepError):
    """Leaf counts must be powers of two in every direction."""


class TreeConsistencyError(HpstepError):
    """Internal tree invariant violated (e.g. merging non-adjacent children)."""


class InvalidStepError(HpstepError):
    """Raised for non-positive time steps."""


class UnknownTableauError(HpstepError):
    """Requested a Butcher tableau that is not in the registry."""


class UnsupportedConfigurationError(HpstepError):
    """Scheme/problem combination outside the supported envelope."""


class DivergenceError(HpstepError):
    """Time stepping produced non-finite or exploding values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(HpstepError):
    """Invalid run configuration (unknown key, unresolvable name, ...)."""
