"""Exception types shared across the estimation stack.

Everything raised by the library derives from :class:`EstimationError`, so a
driver can treat any of them as "this run diverged" without enumerating causes.
"""


class EstimationError(Exception):
    """Base class for all errors raised by this package."""


class AngleNearPi(EstimationError):
    """Rotation logarithm requested too close to the cut locus (angle ~ pi)."""


class JacobianSingular(EstimationError):
    """Rotation angle at or beyond 2*pi where the (inverse) Jacobian is singular."""


class CovarianceNotPSD(EstimationError):
    """Covariance matrix could not be factored even with diagonal jitter."""


class CholeskyFailure(EstimationError):
    """Sigma-point Cholesky factorization failed (indefinite augmented covariance)."""


class LinearSolveFailure(EstimationError):
    """Innovation covariance is singular; Kalman gain solve failed."""


class InnovationLogFailure(EstimationError):
    """Predicted-state-to-measurement error is at the cut locus."""


class NoConvergence(EstimationError):
    """Iteration budget exhausted before reaching the requested tolerance."""
