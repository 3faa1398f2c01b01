"""Exception types shared across the package."""


class LifshitzError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(LifshitzError, ValueError):
    """Invalid model, law or experiment parameters."""


class DomainError(LifshitzError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class HypothesisError(LifshitzError):
    """The hypothesis of an inequality does not hold for the given input.

    This is an expected outcome for some inputs (for example Temple's
    inequality applied to two-valued potentials) and callers test for it.
    """


class OutOfRegimeError(LifshitzError):
    """Energy or length scale outside the range where an estimate applies."""


class InvariantError(LifshitzError):
    """A computed object violates one of its structural invariants."""


class ConvergenceError(LifshitzError):
    """An iterative solver did not reach the requested tolerance.

    ``residuals`` holds the best residual norms seen before giving up.
    """

    def __init__(self, message, residuals=None, eigenvalues=None):
        super().__init__(message)
        self.residuals = residuals
        self.eigenvalues = eigenvalues


class UnresolvedSpectrumError(LifshitzError):
    """Counting requested above the highest computed eigenvalue."""
