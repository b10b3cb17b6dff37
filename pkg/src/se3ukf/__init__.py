"""Unscented Kalman filtering on SE(3) with sigma points on the Lie algebra."""

from .errors import (
    AngleNearPi,
    CholeskyFailure,
    CovarianceNotPSD,
    EstimationError,
    InnovationLogFailure,
    JacobianSingular,
    LinearSolveFailure,
    NoConvergence,
)
from .lie import (
    Pose,
    adjoint_se3,
    bch_compose_first_order,
    bch_split_first_order,
    exp_se3,
    exp_so3,
    hat_se3,
    hat_so3,
    jac_l_inv_se3,
    jac_l_inv_so3,
    jac_l_se3,
    jac_l_so3,
    jac_r_inv_se3,
    jac_r_inv_so3,
    jac_r_se3,
    jac_r_so3,
    log_se3,
    log_so3,
    series_jacobian,
    vee_se3,
    vee_so3,
)

__version__ = "0.1.0"
