"""Exception types raised across the package."""

from __future__ import annotations


class SafeMdpError(Exception):
    """Base class for all package-specific errors."""


class ModelFormatError(SafeMdpError):
    """A model or policy document is malformed (bad JSON, unknown labels, duplicates)."""


class ModelValidationError(SafeMdpError):
    """A structurally well-formed model violates an invariant.

    Attributes
    ----------
    violations : list of str
        One entry per violated invariant, naming the offending index.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PolicyError(SafeMdpError):
    """A policy row is not a probability distribution or misses a state."""


class NotTransientError(SafeMdpError):
    """The taboo block of the induced chain is not transient.

    Attributes
    ----------
    spectral_radius : float
        Estimated spectral radius of the taboo block.
    """

    def __init__(self, spectral_radius: float):
        self.spectral_radius = float(spectral_radius)
        super().__init__(
            f"taboo block is not transient (spectral radius {self.spectral_radius:.12g})"
        )


class MaxIterationsError(SafeMdpError):
    """An iterative solver hit its sweep limit before meeting the tolerance.

    Attributes
    ----------
    last : numpy.ndarray
        The final iterate when the limit was reached.
    """

    def __init__(self, message: str, last=None):
        self.last = last
        super().__init__(message)


class DivergenceError(SafeMdpError):
    """Iterates grew past the divergence guard, indicating a non-transient policy."""


class InfeasibleError(SafeMdpError):
    """No policy satisfies the requested safety constraint."""


class CapExceededError(SafeMdpError):
    """Pure-policy enumeration would exceed the configured cap."""


class PathExplosionError(SafeMdpError):
    """Path enumeration exceeded its node budget."""


class LpUnboundedError(SafeMdpError):
    """The linear program is unbounded."""


class LpInfeasibleError(SafeMdpError):
    """Phase one of the simplex ended with artificial mass left, so the LP is infeasible."""


class LpNumericalError(SafeMdpError):
    """A simplex pivot fell below the stability threshold."""
