"""Exception types raised across the package."""
import numpy as np


class ConfigurationError(ValueError):
    """Invalid parameters for a kernel, design or experiment."""


class DegenerateDesignError(ValueError):
    """A design has duplicate points or too few points for the request."""


class ContractError(ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class IllConditionedError(np.linalg.LinAlgError):
    """Cholesky factorization failed at every jitter level tried.

    Attributes
    ----------
    minor : int
        Order of the leading minor that was not positive definite at the
        largest jitter attempted (1-based, LAPACK convention).
    jitter : float
        The largest jitter that was tried.
    """

    def __init__(self, minor, jitter):
        self.minor = int(minor)
        self.jitter = float(jitter)
        super().__init__(
            f"matrix not positive definite: leading minor of order {self.minor} "
            f"failed with jitter {self.jitter:g}"
        )


class ExperimentError(RuntimeError):
    """A rate study could not produce a trustworthy result."""
