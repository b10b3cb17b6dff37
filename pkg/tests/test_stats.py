import math

import numpy as np
import pytest

from se3ukf.errors import CovarianceNotPSD, NoConvergence
from se3ukf.lie import Pose, exp_se3, jac_r_se3, log_se3
from se3ukf.stats import (
    GaussianOnGroup,
    IndefiniteCovarianceWarning,
    covariance_on_algebra,
    karcher_mean,
    manton_descent,
    mean_on_algebra,
    psd_cholesky,
    sample,
)

from conftest import random_twists


# ---------------------------------------------------------------------------
# psd_cholesky
# ---------------------------------------------------------------------------


def test_psd_cholesky_zero_matrix():
    assert np.array_equal(psd_cholesky(np.zeros((6, 6))), np.zeros((6, 6)))


def test_psd_cholesky_singular_psd():
    A = np.diag([1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    L = psd_cholesky(A)
    np.testing.assert_allclose(L @ L.T, A, atol=1e-10)


def test_psd_cholesky_rejects_indefinite():
    from se3ukf.errors import CholeskyFailure

    with pytest.raises(CholeskyFailure):
        psd_cholesky(np.diag([1.0, -1.0, 1.0, 1.0, 1.0, 1.0]))


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


def test_sample_zero_covariance_returns_mean(rng):
    mean = exp_se3(np.array([0.1, 0.2, -0.3, 1.0, 0.0, 2.0]))
    got = sample(GaussianOnGroup(mean, np.zeros((6, 6))), rng)
    np.testing.assert_array_equal(got.R, mean.R)
    np.testing.assert_array_equal(got.r, mean.r)


def test_sample_monte_carlo_covariance():
    sigma2 = 0.05**2
    dist = GaussianOnGroup(Pose.identity(), sigma2 * np.eye(6))
    draws = sample(dist, np.random.default_rng(7), n=100_000)
    logs = log_se3(draws)
    emp = logs.T @ logs / logs.shape[0]
    np.testing.assert_allclose(np.diag(emp), sigma2, rtol=0.05)
    off = emp - np.diag(np.diag(emp))
    assert np.abs(off).max() < 0.05 * sigma2


def test_sample_is_seed_deterministic():
    dist = GaussianOnGroup(Pose.identity(), 0.01 * np.eye(6))
    a = sample(dist, np.random.default_rng(42))
    b = sample(dist, np.random.default_rng(42))
    np.testing.assert_array_equal(a.R, b.R)
    np.testing.assert_array_equal(a.r, b.r)


def test_sample_rejects_indefinite_covariance(rng):
    dist = GaussianOnGroup(Pose.identity(), np.diag([1.0, -1.0, 1, 1, 1, 1.0]))
    with pytest.raises(CovarianceNotPSD):
        sample(dist, rng)


def test_sample_mean_consistency():
    # norm of the algebra mean of 1e5 samples stays within 5 sigma/sqrt(N)*sqrt(6)
    sigma = 0.1
    dist = GaussianOnGroup(Pose.identity(), sigma**2 * np.eye(6))
    logs = log_se3(sample(dist, np.random.default_rng(3), n=100_000))
    bound = 5.0 * sigma / math.sqrt(logs.shape[0]) * math.sqrt(6.0)
    assert np.linalg.norm(logs.mean(axis=0)) <= bound


# ---------------------------------------------------------------------------
# mean / covariance on the algebra
# ---------------------------------------------------------------------------


def test_mean_single_twist():
    xi = np.array([0.1, 0.2, 0.3, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(mean_on_algebra(xi[None], [1.0]), xi)


def test_mean_symmetric_pair_cancels(rng):
    xi = rng.normal(size=6)
    got = mean_on_algebra(np.stack([xi, -xi]), [0.5, 0.5])
    np.testing.assert_array_equal(got, np.zeros(6))


def test_mean_matches_summation_oracle(rng):
    twists = rng.normal(size=(40, 6))
    w = rng.uniform(0.1, 1.0, size=40)
    w /= w.sum()
    oracle = sum(wi * xi for wi, xi in zip(w, twists))
    np.testing.assert_allclose(mean_on_algebra(twists, w), oracle, atol=1e-14)


def test_covariance_zero_for_degenerate_set():
    xi = np.array([0.1, -0.2, 0.3, 0.5, 0.0, 1.0])
    twists = np.tile(xi, (7, 1))
    P = covariance_on_algebra(twists, xi, np.full(7, 1.0 / 7.0))
    np.testing.assert_array_equal(P, np.zeros((6, 6)))


def test_covariance_zero_mean_is_plain_scatter(rng):
    twists = rng.normal(size=(30, 6)) * 0.1
    w = np.full(30, 1.0 / 30.0)
    P = covariance_on_algebra(twists, np.zeros(6), w)
    oracle = sum(wi * np.outer(x, x) for wi, x in zip(w, twists))
    np.testing.assert_allclose(P, oracle, atol=1e-15)


def test_covariance_matches_transported_scatter_oracle(rng):
    twists = rng.normal(size=(25, 6)) * 0.2
    w = rng.uniform(0.5, 1.5, size=25)
    w /= w.sum()
    mean = mean_on_algebra(twists, w)
    d = twists - mean
    S = sum(wi * np.outer(x, x) for wi, x in zip(w, d))
    J = jac_r_se3(mean)
    np.testing.assert_allclose(covariance_on_algebra(twists, mean, w), J @ S @ J.T, atol=1e-12)


def test_covariance_output_symmetric_psd(rng):
    for _ in range(10):
        twists = rng.normal(size=(15, 6))
        w = rng.uniform(0.01, 1.0, size=15)
        w /= w.sum()
        P = covariance_on_algebra(twists, mean_on_algebra(twists, w), w)
        assert np.array_equal(P, P.T)
        assert np.linalg.eigvalsh(P)[0] >= -1e-10


def test_covariance_warns_when_indefinite():
    twists = np.zeros((2, 6))
    twists[0, 0] = 1.0
    twists[1, 0] = -1.0
    with pytest.warns(IndefiniteCovarianceWarning):
        covariance_on_algebra(twists, np.zeros(6), np.array([-1.0, 0.5]))


# ---------------------------------------------------------------------------
# Karcher mean
# ---------------------------------------------------------------------------


def test_karcher_single_pose_needs_no_correction():
    T = exp_se3(np.array([0.2, -0.1, 0.4, 1.0, 0.5, -0.7]))
    mean, objectives = manton_descent([T])
    assert len(objectives) == 1  # converged at the initial guess
    assert np.abs(mean.as_matrix() - T.as_matrix()).max() < 1e-12


def test_karcher_symmetric_pair_gives_identity(rng):
    xi = rng.normal(size=6) * 0.4
    mean = karcher_mean([exp_se3(xi), exp_se3(-xi)])
    np.testing.assert_allclose(mean.as_matrix(), np.eye(4), atol=1e-9)


def test_karcher_close_to_algebra_mean_for_small_dispersion(rng):
    center = random_twists(rng, 1, theta_max=1.0)[0]
    offsets = rng.normal(size=(25, 6)) * 0.05
    poses = exp_se3(log_se3(exp_se3(center)) + offsets)
    mean = karcher_mean(poses)
    algebra = exp_se3(mean_on_algebra(log_se3(poses), np.full(25, 1.0 / 25.0)))
    gap = np.linalg.norm(log_se3(mean.inverse().compose(algebra)))
    assert gap <= 1e-3


def test_karcher_objective_non_increasing(rng):
    for _ in range(5):
        poses = exp_se3(rng.normal(size=(12, 6)) * 0.3)
        _, objectives = manton_descent(poses)
        assert np.all(np.diff(objectives) <= 1e-14)


def test_karcher_gradient_norm_below_tol_at_return(rng):
    poses = exp_se3(rng.normal(size=(10, 6)) * 0.2)
    tol = 1e-10
    mean = karcher_mean(poses, tol=tol)
    eps = log_se3(mean.inverse().compose(poses))
    grad = eps.mean(axis=0)
    assert np.linalg.norm(grad) < tol


def test_karcher_weighted_matches_weighted_algebra_mean_closely(rng):
    # unscented-style weights with a negative w0 remain a valid fixed point
    poses = exp_se3(rng.normal(size=(5, 6)) * 1e-3)
    w = np.array([-3.0, 1.0, 1.0, 1.0, 1.0])
    mean = karcher_mean(poses, weights=w)
    algebra = exp_se3(mean_on_algebra(log_se3(poses), w))
    assert np.linalg.norm(log_se3(mean.inverse().compose(algebra))) < 1e-8


def test_karcher_no_convergence_budget():
    # two antipodal-ish rotations at large dispersion with max_iter=0 budget
    poses = exp_se3(np.array([[1.5, 0, 0, 0, 0, 0], [-0.7, 0.9, 0, 0, 0, 0]]))
    with pytest.raises(NoConvergence):
        karcher_mean(poses, tol=1e-16, max_iter=1)
