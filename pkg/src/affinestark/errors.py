"""Exception and warning types shared by all modules."""

from __future__ import annotations


class AffineStarkError(Exception):
    """Base class for library errors."""


class InvalidInputError(AffineStarkError, ValueError):
    """Input data violates a structural invariant (shape, finiteness, symmetry)."""


class DomainError(AffineStarkError, ValueError):
    """Argument outside the supported domain of a special function."""


class ConfigurationError(AffineStarkError, ValueError):
    """Inconsistent or unsupported model configuration."""


class ResolutionError(AffineStarkError, ValueError):
    """Discretization too coarse for the requested potential."""


class PreconditionError(AffineStarkError, ValueError):
    """A documented precondition of an operation is not met."""


class SingularityError(AffineStarkError, ValueError):
    """Evaluation requested at (or too close to) a singular point."""


class AccuracyError(AffineStarkError, ArithmeticError):
    """A numerical target could not be reached.

    The best available estimate and its error estimate are attached.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConvergenceError(AffineStarkError, ArithmeticError):
    """An iterative kernel failed to converge."""


class AmbiguityError(AffineStarkError, ValueError):
    """Ladder clusters overlap; carries the colliding residues."""

    def __init__(self, message, residues=()):
        super().__init__(message)
        self.residues = tuple(residues)


class InsufficientOverlapError(AffineStarkError, ValueError):
    """The region where two rescaled wavefunctions can be compared is too small."""


class GaugeError(AffineStarkError, RuntimeError):
    """Bloch gauge fixing failed, typically because of a band crossing."""


class ConditioningError(AffineStarkError, ArithmeticError):
    """An overlap matrix is too close to singular to orthonormalize."""

    def __init__(self, message, smallest_eigenvalue=None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class ScalingViolationWarning(UserWarning):
    """Matrix elements deviate from the expected scale covariance."""
