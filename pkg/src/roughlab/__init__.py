"""Numerical laboratory for Gaussian rough paths with long-time memory."""

from .capacity import (
    TailParams,
    capacity_lower_from_prob,
    capacity_upper_1d,
    cm_energy_bm,
    ldp_slope_fit,
    poly_derivative_bound,
    poly_q_norm_bound,
    rate_fd,
    tail_capacity_bound,
)
from .fbm import CovarianceError, CovarianceModel, GridSample, covariance, sample_paths, verify_long_memory
from .lift import DyadicLift, ResourceLimitError, interpolate, interval_signature, lift_dyadic
from .rde import BlowUpError, VectorFieldSet, continuity_probe, solve_along, wz_convergence
from .tensor import TruncatedTensor, chen_mul, dilate, identity, segment_signature
from .variation import ConstraintError, MetricParams, dp_exact, hl_bound, rho

__version__ = "0.1.0"
