"""Exception types shared across the package."""

import numpy as np


class InvalidGateError(ValueError):
    """A gate refers to qubits that do not exist or is otherwise malformed."""


class DomainError(ValueError):
    """An input lies outside the domain a transformation is defined on."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization failed even after the maximum jitter.

    Attributes
    ----------
    min_eigenvalue : float
        Smallest eigenvalue of the matrix that could not be factorized.
    """

    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class InitializationError(RuntimeError):
    """The training objective is not finite at the starting point."""


class FitError(ValueError):
    """The data cannot support the requested fit."""


class ObjectiveError(RuntimeError):
    """A black-box objective returned something unusable.

    The partial optimization trace is attached as ``trace`` so the caller can
    inspect what happened before the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigError(ValueError):
    """An experiment configuration is invalid."""
