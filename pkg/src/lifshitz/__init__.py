"""Random breather Schroedinger operators: discretisation, eigenvalue bounds and Lifshitz-tail statistics."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    HypothesisError,
    InvariantError,
    LifshitzError,
    OutOfRegimeError,
    UnresolvedSpectrumError,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "ConvergenceError",
    "DomainError",
    "HypothesisError",
    "InvariantError",
    "LifshitzError",
    "OutOfRegimeError",
    "UnresolvedSpectrumError",
]
