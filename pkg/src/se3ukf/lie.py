"""Closed-form SO(3)/SE(3) primitives: exp, log, adjoint, Jacobians and BCH.

Conventions used everywhere in this package:

* twists are 6-vectors ``xi = [theta, rho]`` with the rotation part first
  (radians) and the translation part second (meters),
* velocities are 6-vectors ``V = [omega, v]`` (body frame, rotation first),
* the adjoint matrix of a twist is ``[[hat(theta), 0], [hat(rho), hat(theta)]]``,
  and covariance matrices inherit this block ordering.

All functions broadcast over leading batch dimensions: ``exp_so3`` maps
``(..., 3) -> (..., 3, 3)``, ``jac_r_inv_se3`` maps ``(..., 6) -> (..., 6, 6)``
and so on.  This keeps sigma-point loops and reference integrators vectorized.

The right Jacobian follows the series convention ``Phi_r(ad(xi)) =
sum_i (-ad(xi))^i / (i+1)!`` and its inverse is the Bernoulli series evaluated
at ``-ad(xi)``; ``series_jacobian`` implements the literal series in its own
matrix argument and is intended as a test oracle only.

Scalar coefficient functions switch to truncated Taylor expansions below
per-coefficient thresholds.  The thresholds differ because the closed forms
lose accuracy at different rates: expressions with quartic cancellation such
as ``(alpha + beta - 2)/theta^4`` are pure rounding noise for theta ~ 1e-4
(absolute error ~ eps/theta^4), so they switch over much earlier than e.g.
``sin(theta)/theta``.  Each threshold is chosen so both branches agree to
better than 1e-10 at the switch point.

Everything here is a pure function of its inputs and safe to call from any
number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import AngleNearPi, JacobianSingular

__all__ = [
    "Pose",
    "hat_so3",
    "vee_so3",
    "hat_se3",
    "vee_se3",
    "exp_so3",
    "log_so3",
    "jac_r_so3",
    "jac_l_so3",
    "jac_r_inv_so3",
    "jac_l_inv_so3",
    "exp_se3",
    "log_se3",
    "adjoint_se3",
    "jac_r_se3",
    "jac_l_se3",
    "jac_r_inv_se3",
    "jac_l_inv_se3",
    "bch_compose_first_order",
    "bch_split_first_order",
    "series_jacobian",
]

# Rotation angle at/beyond which inverse Jacobians are singular.
MAX_ANGLE = 2.0 * math.pi

# log_so3 requires trace(R) > -1 + this margin, i.e. the angle bounded
# away from pi where the logarithm is non-unique.
NEAR_PI_TRACE_MARGIN = 1e-9

# Pose composition re-orthonormalizes when ||R^T R - I||_F exceeds this.
ORTHONORMALITY_TOL = 1e-9


# ---------------------------------------------------------------------------
# scalar coefficient functions (batched over arrays of angles)
# ---------------------------------------------------------------------------


def _coef_sin(t):
    """sin(t)/t, Taylor below 1e-4."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-4
    safe = np.where(small, 1.0, t)
    t2 = t * t
    return np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(safe) / safe)


def _coef_cos(t):
    """(1 - cos t)/t^2 computed as 2 sin^2(t/2)/t^2, Taylor below 1e-4."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-4
    safe = np.where(small, 1.0, t)
    t2 = t * t
    s = np.sin(safe / 2.0)
    return np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, 2.0 * s * s / (safe * safe))


def _coef_cub(t):
    """(t - sin t)/t^3, Taylor below 1e-2 (cancellation noise ~ eps/t^2)."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-2
    safe = np.where(small, 1.0, t)
    t2 = t * t
    taylor = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    return np.where(small, taylor, (safe - np.sin(safe)) / safe**3)


def _coef_inv(t):
    """(1 - (t/2) cot(t/2))/t^2, Taylor below 1e-2; limit 1/12 at t = 0."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-2
    safe = np.where(small, 1.0, t)
    t2 = t * t
    taylor = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    half = safe / 2.0
    return np.where(small, taylor, (1.0 - half * np.cos(half) / np.sin(half)) / (safe * safe))


def _alpha_beta(t):
    """alpha = (t/2) cot(t/2) and beta = (t/2)^2 / sin^2(t/2)."""
    half = t / 2.0
    s = np.sin(half)
    c = np.cos(half)
    return half * c / s, half * half / (s * s)


def _coef_q4(t):
    """(alpha + beta - 2)/t^4, Taylor below 1e-1; limit 1/360 at t = 0.

    Quartic cancellation: the closed form loses ~eps/t^4 absolute accuracy,
    so the switch point is much larger than for the quadratic coefficients.
    """
    t = np.asarray(t, dtype=float)
    small = t < 1e-1
    safe = np.where(small, 1.0, t)
    t2 = t * t
    taylor = 1.0 / 360.0 + t2 / 7560.0 + t2 * t2 / 201600.0 + t2 * t2 * t2 / 5987520.0
    alpha, beta = _alpha_beta(safe)
    return np.where(small, taylor, (alpha + beta - 2.0) / safe**4)


def _gamma2(t):
    """(2 - alpha - beta)/(2 t^4), Taylor below 1e-1; limit -1/720 at t = 0."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-1
    safe = np.where(small, 1.0, t)
    t2 = t * t
    taylor = -1.0 / 720.0 - t2 / 15120.0 - t2 * t2 / 403200.0 - t2 * t2 * t2 / 11975040.0
    alpha, beta = _alpha_beta(safe)
    return np.where(small, taylor, (2.0 - alpha - beta) / (2.0 * safe**4))


def _coef_e(t):
    """(1 - t^2/2 - cos t)/t^4, Taylor below 1e-1; limit -1/24 at t = 0."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-1
    safe = np.where(small, 1.0, t)
    t2 = t * t
    taylor = -1.0 / 24.0 + t2 / 720.0 - t2 * t2 / 40320.0 + t2 * t2 * t2 / 3628800.0
    return np.where(small, taylor, (1.0 - safe * safe / 2.0 - np.cos(safe)) / safe**4)


def _coef_f(t):
    """(t - sin t - t^3/6)/t^5, Taylor below 1e-1; limit -1/120 at t = 0."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-1
    safe = np.where(small, 1.0, t)
    t2 = t * t
    taylor = -1.0 / 120.0 + t2 / 5040.0 - t2 * t2 / 362880.0 + t2 * t2 * t2 / 39916800.0
    return np.where(small, taylor, (safe - np.sin(safe) - safe**3 / 6.0) / safe**5)


def _angle(theta):
    return np.linalg.norm(np.asarray(theta, dtype=float), axis=-1)


def _check_angle_below_2pi(t):
    if np.any(t >= MAX_ANGLE):
        raise JacobianSingular(
            f"rotation angle {float(np.max(t)):.6f} >= 2*pi; inverse Jacobian singular"
        )


def _bc(coef):
    """Append two axes so scalar coefficients broadcast against matrices."""
    return np.asarray(coef)[..., None, None]


# ---------------------------------------------------------------------------
# hat / vee
# ---------------------------------------------------------------------------


def hat_so3(w):
    """Skew-symmetric matrix of a 3-vector: hat(w) u = w x u."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    x, y, z = w[..., 0], w[..., 1], w[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def vee_so3(W):
    """Inverse of :func:`hat_so3`."""
    W = np.asarray(W, dtype=float)
    return np.stack([W[..., 2, 1], W[..., 0, 2], W[..., 1, 0]], axis=-1)


def hat_se3(xi):
    """4x4 matrix form of a twist: [[hat(theta), rho], [0, 0]]."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1] + (4, 4))
    out[..., :3, :3] = hat_so3(xi[..., :3])
    out[..., :3, 3] = xi[..., 3:]
    return out


def vee_se3(X):
    """Inverse of :func:`hat_se3`."""
    X = np.asarray(X, dtype=float)
    return np.concatenate([vee_so3(X[..., :3, :3]), X[..., :3, 3]], axis=-1)


# ---------------------------------------------------------------------------
# SO(3)
# ---------------------------------------------------------------------------


def exp_so3(theta):
    """Rotation matrix exp(hat(theta)) = I + sin(t)/t H + (1-cos t)/t^2 H^2."""
    theta = np.asarray(theta, dtype=float)
    t = _angle(theta)
    H = hat_so3(theta)
    return np.eye(3) + _bc(_coef_sin(t)) * H + _bc(_coef_cos(t)) * (H @ H)


def log_so3(R):
    """Rotation vector of R, valid for angles in [0, pi).

    Uses the atan2/trace form, which stays accurate well beyond the
    asin-based formula's pi/2 domain.  Raises :class:`AngleNearPi` when
    trace(R) <= -1 + 1e-9, i.e. at the cut locus.
    """
    R = np.asarray(R, dtype=float)
    tr = np.einsum("...ii->...", R)
    if np.any(tr <= -1.0 + NEAR_PI_TRACE_MARGIN):
        raise AngleNearPi("rotation angle too close to pi; logarithm ill-conditioned")
    y = 0.5 * np.stack(
        [
            R[..., 2, 1] - R[..., 1, 2],
            R[..., 0, 2] - R[..., 2, 0],
            R[..., 1, 0] - R[..., 0, 1],
        ],
        axis=-1,
    )
    s = np.linalg.norm(y, axis=-1)  # sin(angle)
    c = np.clip(0.5 * (tr - 1.0), -1.0, 1.0)  # cos(angle)
    t = np.arctan2(s, c)
    small = t < 1e-4
    scale = np.where(small, 1.0 + t * t / 6.0, t / np.where(small, 1.0, s))
    return scale[..., None] * y


def jac_r_so3(theta):
    """Right Jacobian on SO(3): I - (1-cos t)/t^2 H + (t-sin t)/t^3 H^2."""
    theta = np.asarray(theta, dtype=float)
    t = _angle(theta)
    H = hat_so3(theta)
    return np.eye(3) - _bc(_coef_cos(t)) * H + _bc(_coef_cub(t)) * (H @ H)


def jac_l_so3(theta):
    """Left Jacobian on SO(3), via the duality Psi_l(H) = Psi_r(-H)."""
    return jac_r_so3(-np.asarray(theta, dtype=float))


def jac_r_inv_so3(theta):
    """Inverse right Jacobian on SO(3): I + H/2 + (1 - (t/2)cot(t/2))/t^2 H^2."""
    theta = np.asarray(theta, dtype=float)
    t = _angle(theta)
    _check_angle_below_2pi(t)
    H = hat_so3(theta)
    return np.eye(3) + 0.5 * H + _bc(_coef_inv(t)) * (H @ H)


def jac_l_inv_so3(theta):
    """Inverse left Jacobian on SO(3), via Psi_l^-1(H) = Psi_r^-1(-H)."""
    return jac_r_inv_so3(-np.asarray(theta, dtype=float))


# ---------------------------------------------------------------------------
# SE(3) group elements
# ---------------------------------------------------------------------------


@dataclass
class Pose:
    """Element of SE(3): rotation matrix ``R`` and translation ``r`` (meters).

    Both fields may carry leading batch dimensions (``R: (..., 3, 3)``,
    ``r: (..., 3)``); composition and inversion broadcast.  Composition
    re-orthonormalizes the rotation via a polar projection whenever
    floating-point drift exceeds ``ORTHONORMALITY_TOL``.
    """

    R: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.r = np.asarray(self.r, dtype=float)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @property
    def batch_shape(self):
        return self.r.shape[:-1]

    def __getitem__(self, idx) -> "Pose":
        return Pose(self.R[idx], self.r[idx])

    def compose(self, other: "Pose") -> "Pose":
        R = self.R @ other.R
        r = (self.R @ other.r[..., None])[..., 0] + self.r
        defect = orthonormality_defect(R)
        if np.any(defect > ORTHONORMALITY_TOL):
            R = _reorthonormalize(R, defect > ORTHONORMALITY_TOL)
        return Pose(R, r)

    def inverse(self) -> "Pose":
        Rt = np.swapaxes(self.R, -1, -2)
        return Pose(Rt, -(Rt @ self.r[..., None])[..., 0])

    def as_matrix(self) -> np.ndarray:
        out = np.zeros(self.batch_shape + (4, 4))
        out[..., :3, :3] = self.R
        out[..., :3, 3] = self.r
        out[..., 3, 3] = 1.0
        return out

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        if T.shape[-2:] != (4, 4):
            raise ValueError(f"expected (..., 4, 4) homogeneous matrix, got {T.shape}")
        expected = np.zeros(4)
        expected[3] = 1.0
        if not np.allclose(T[..., 3, :], expected, atol=1e-9):
            raise ValueError("last row of a homogeneous SE(3) matrix must be [0, 0, 0, 1]")
        return cls(T[..., :3, :3].copy(), T[..., :3, 3].copy())


def orthonormality_defect(R):
    """Frobenius norm of R^T R - I, batched."""
    R = np.asarray(R, dtype=float)
    G = np.swapaxes(R, -1, -2) @ R - np.eye(3)
    return np.linalg.norm(G, axis=(-2, -1))


def _reorthonormalize(R, mask):
    """Project the masked rotations back onto SO(3) via polar decomposition."""
    R = np.array(R, copy=True)
    sub = R[mask] if R.ndim > 2 else R
    U, _, Vt = np.linalg.svd(sub)
    fixed = U @ Vt
    neg = np.linalg.det(fixed) < 0.0
    if np.any(neg):
        U = np.array(U, copy=True)
        U[neg, :, -1] *= -1.0
        fixed = U @ Vt
    if R.ndim > 2:
        R[mask] = fixed
    else:
        R = fixed
    return R


def exp_se3(xi) -> Pose:
    """Exponential of a twist: R = exp(hat(theta)), r = Psi_l(hat(theta)) rho."""
    xi = np.asarray(xi, dtype=float)
    theta, rho = xi[..., :3], xi[..., 3:]
    R = exp_so3(theta)
    r = (jac_l_so3(theta) @ rho[..., None])[..., 0]
    return Pose(R, r)


def log_se3(T: Pose):
    """Twist of a pose: theta = log(R), rho = Psi_l^-1(hat(theta)) r."""
    theta = log_so3(T.R)
    rho = (jac_l_inv_so3(theta) @ T.r[..., None])[..., 0]
    return np.concatenate([theta, rho], axis=-1)


def adjoint_se3(xi):
    """Adjoint matrix of a twist: [[hat(theta), 0], [hat(rho), hat(theta)]]."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1] + (6, 6))
    H = hat_so3(xi[..., :3])
    out[..., :3, :3] = H
    out[..., 3:, 3:] = H
    out[..., 3:, :3] = hat_so3(xi[..., 3:])
    return out


# ---------------------------------------------------------------------------
# SE(3) Jacobians
# ---------------------------------------------------------------------------


def _coupling_q(theta, rho, t):
    """Four-coefficient closed form of the Jacobian coupling block Q_r."""
    H = hat_so3(theta)
    P = hat_so3(rho)
    HP = H @ P
    PH = P @ H
    HPH = HP @ H
    c1 = _bc(_coef_cub(t))
    c2 = _bc(_coef_e(t))
    c3 = c2 - 3.0 * _bc(_coef_f(t))
    return (
        0.5 * P
        + c1 * (HP + PH + HPH)
        - c2 * (H @ HP + PH @ H - 3.0 * HPH)
        - c3 * (HPH @ H)
    )


def jac_r_se3(xi):
    """Right Jacobian on SE(3): [[Psi_r, 0], [Q_r^T, Psi_r]].

    Equals the series sum_i (-ad(xi))^i / (i+1)!; requires the rotation
    angle below 2*pi (the Jacobian itself is singular there).
    """
    xi = np.asarray(xi, dtype=float)
    theta, rho = xi[..., :3], xi[..., 3:]
    t = _angle(theta)
    _check_angle_below_2pi(t)
    psi = jac_r_so3(theta)
    out = np.zeros(xi.shape[:-1] + (6, 6))
    out[..., :3, :3] = psi
    out[..., 3:, 3:] = psi
    out[..., 3:, :3] = np.swapaxes(_coupling_q(theta, rho, t), -1, -2)
    return out


def jac_l_se3(xi):
    """Left Jacobian on SE(3), via Phi_l(ad(xi)) = Phi_r(-ad(xi))."""
    return jac_r_se3(-np.asarray(xi, dtype=float))


def jac_r_inv_se3(xi):
    """Closed-form inverse right Jacobian on SE(3): [[Psi_r^-1, 0], [C_r, Psi_r^-1]].

    The coupling block is computed directly, without inverting anything:

        C_r = rho_hat/2 + (1 - alpha)/t^2 (H P + P H)
              + (alpha + beta - 2)/t^4 (theta . rho) H^2

    with alpha = (t/2) cot(t/2), beta = (t/2)^2 / sin^2(t/2), H = hat(theta),
    P = hat(rho).  The scalar coefficients tend to 1/12 and 1/360 at t = 0.
    """
    xi = np.asarray(xi, dtype=float)
    theta, rho = xi[..., :3], xi[..., 3:]
    t = _angle(theta)
    _check_angle_below_2pi(t)
    psi_inv = jac_r_inv_so3(theta)
    H = hat_so3(theta)
    P = hat_so3(rho)
    dot = _bc(np.einsum("...i,...i->...", theta, rho))
    c = 0.5 * P + _bc(_coef_inv(t)) * (H @ P + P @ H) + _bc(_coef_q4(t)) * dot * (H @ H)
    out = np.zeros(xi.shape[:-1] + (6, 6))
    out[..., :3, :3] = psi_inv
    out[..., 3:, 3:] = psi_inv
    out[..., 3:, :3] = c
    return out


def jac_l_inv_se3(xi):
    """Inverse left Jacobian on SE(3), via Phi_l^-1(ad(xi)) = Phi_r^-1(-ad(xi))."""
    return jac_r_inv_se3(-np.asarray(xi, dtype=float))


# ---------------------------------------------------------------------------
# first-order BCH
# ---------------------------------------------------------------------------


def bch_compose_first_order(a, b):
    """First-order BCH composition: log(exp(a) exp(b)) ~ a + Phi_r^-1(ad(a)) b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a + (jac_r_inv_se3(a) @ b[..., None])[..., 0]


def bch_split_first_order(a, d):
    """First-order BCH split: exp(a + d) ~ exp(a) exp(e) with e = Phi_r(ad(a)) d."""
    a = np.asarray(a, dtype=float)
    d = np.asarray(d, dtype=float)
    return (jac_r_se3(a) @ d[..., None])[..., 0]


# ---------------------------------------------------------------------------
# series oracle
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _bernoulli(n: int) -> Fraction:
    """Bernoulli number B_n with B_1 = -1/2, via the defining recurrence."""
    if n == 0:
        return Fraction(1)
    acc = Fraction(0)
    for j in range(n):
        acc += Fraction(math.comb(n + 1, j)) * _bernoulli(j)
    return -acc / (n + 1)


def series_jacobian(ad, terms: int, inverse: bool = False):
    """Truncated Jacobian series in the matrix argument ``ad``.

    Forward: sum_{i<terms} ad^i / (i+1)!.  Inverse: sum_{i<terms} B_i ad^i / i!
    with Bernoulli numbers B_i (B_1 = -1/2).  Intended as a test oracle; the
    inverse series has a finite radius of convergence.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    ad = np.asarray(ad, dtype=float)
    n = ad.shape[-1]
    power = np.broadcast_to(np.eye(n), ad.shape).copy()
    acc = np.zeros_like(ad)
    for i in range(terms):
        coef = float(_bernoulli(i)) / math.factorial(i) if inverse else 1.0 / math.factorial(i + 1)
        acc += coef * power
        power = power @ ad
    return acc
