"""Concentrated Gaussian distributions on SE(3) and tangent-space statistics.

A concentrated Gaussian is ``X = mean . exp(hat(u))`` with ``u ~ N(0, P)`` on
the right tangent space, valid while the distribution stays tightly focused
around the mean.  Sample means are computed on the algebra (weighted average
of logarithms); the matching empirical covariance transports the tangent
scatter with the right Jacobian of the mean twist.  The Karcher mean is
available as the iterative refinement of the algebra mean (gradient descent
with unit step).

All functions are pure; randomness enters only through an explicitly passed
``numpy.random.Generator``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CholeskyFailure, CovarianceNotPSD, NoConvergence
from .lie import Pose, exp_se3, jac_r_se3, log_se3

__all__ = [
    "GaussianOnGroup",
    "IndefiniteCovarianceWarning",
    "sample",
    "mean_on_algebra",
    "covariance_on_algebra",
    "karcher_mean",
    "manton_descent",
    "psd_cholesky",
]

# Eigenvalues above this (negative) floor still count as positive semidefinite.
PSD_EIG_TOL = -1e-10


class IndefiniteCovarianceWarning(RuntimeWarning):
    """A weighted empirical covariance came out indefinite beyond tolerance."""


def psd_cholesky(A, jitter: float = 1e-12):
    """Lower-triangular factor L with L L^T = A for PSD A.

    Exactly-zero matrices factor to zero.  Singular-but-PSD matrices get one
    retry with ``jitter`` added to the diagonal.  Raises
    :class:`CholeskyFailure` if that still fails.
    """
    A = np.asarray(A, dtype=float)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    if not np.any(A):
        return np.zeros_like(A)
    try:
        return np.linalg.cholesky(A + jitter * np.eye(A.shape[-1]))
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure("covariance is not positive semidefinite") from exc


@dataclass
class GaussianOnGroup:
    """Concentrated Gaussian on SE(3): mean pose and 6x6 tangent covariance."""

    mean: Pose
    cov: np.ndarray

    def __post_init__(self):
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.shape != (6, 6):
            raise ValueError(f"covariance must be 6x6, got {self.cov.shape}")


def sample(dist: GaussianOnGroup, rng: np.random.Generator, n: int | None = None) -> Pose:
    """Draw ``mean . exp(hat(u))`` with ``u ~ N(0, cov)``.

    With ``n`` given, returns a batched Pose of ``n`` independent draws.
    """
    try:
        L = psd_cholesky(dist.cov)
    except CholeskyFailure as exc:
        raise CovarianceNotPSD(str(exc)) from exc
    shape = (6,) if n is None else (n, 6)
    u = rng.standard_normal(shape) @ L.T
    return dist.mean.compose(exp_se3(u))


def mean_on_algebra(twists, weights):
    """Weighted average of twists: sum_i w_i xi_i.

    Supports uniform 1/N weights as well as unscented mean weights (which may
    include a large-magnitude w_0).
    """
    twists = np.asarray(twists, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return np.einsum("i,ij->j", weights, twists)


def covariance_on_algebra(twists, mean, weights_p):
    """Jacobian-transported empirical covariance of a twist set.

    Computes ``P = J S J^T`` with ``S = sum_i w_i (xi_i - mean)(xi_i - mean)^T``
    and ``J`` the right Jacobian at the mean twist, then symmetrizes.  Warns
    (never raises) if the result is indefinite beyond tolerance, which can
    happen under unscented weights.
    """
    twists = np.asarray(twists, dtype=float)
    mean = np.asarray(mean, dtype=float)
    weights_p = np.asarray(weights_p, dtype=float)
    d = twists - mean
    S = np.einsum("i,ij,ik->jk", weights_p, d, d)
    J = jac_r_se3(mean)
    P = J @ S @ J.T
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P)[0] < PSD_EIG_TOL:
        warnings.warn(
            "weighted empirical covariance is indefinite beyond tolerance",
            IndefiniteCovarianceWarning,
            stacklevel=2,
        )
    return P


def _as_batched_pose(poses) -> Pose:
    if isinstance(poses, Pose):
        if poses.batch_shape == ():
            return Pose(poses.R[None], poses.r[None])
        return poses
    return Pose(np.stack([p.R for p in poses]), np.stack([p.r for p in poses]))


def manton_descent(poses, weights=None, tol: float = 1e-10, max_iter: int = 100):
    """Gradient descent for the Karcher mean, returning per-iteration objectives.

    Iterates ``X := X exp(hat(a))`` with ``a = sum_i w_i log(X^-1 Y_i)``,
    starting from the exponential of the weighted algebra mean, until
    ``||a|| < tol``.  Step size is 1 (plain fixed-point update), which is
    adequate at the small dispersions this package works with.

    Returns ``(mean_pose, objectives)`` where ``objectives[k]`` is the
    weighted sum of squared log distances ``sum_i w_i ||log(X_k^-1 Y_i)||^2``
    before the k-th correction.  Raises :class:`NoConvergence` when the
    iteration budget runs out.
    """
    Y = _as_batched_pose(poses)
    n = Y.batch_shape[0]
    if n == 0:
        raise ValueError("need at least one pose")
    if weights is None:
        weights = np.full(n, 1.0 / n)
    else:
        weights = np.asarray(weights, dtype=float)

    logs = log_se3(Y)
    X = exp_se3(mean_on_algebra(logs, weights))
    objectives = []
    for _ in range(max_iter):
        eps = log_se3(X.inverse().compose(Y))
        objectives.append(float(np.einsum("i,ij,ij->", weights, eps, eps)))
        a = mean_on_algebra(eps, weights)
        if np.linalg.norm(a) < tol:
            return X, np.asarray(objectives)
        X = X.compose(exp_se3(a))
    raise NoConvergence(f"Karcher mean did not reach tol={tol} in {max_iter} iterations")


def karcher_mean(poses, weights=None, tol: float = 1e-10, max_iter: int = 100) -> Pose:
    """Karcher mean of a set of poses (see :func:`manton_descent`)."""
    X, _ = manton_descent(poses, weights=weights, tol=tol, max_iter=max_iter)
    return X
