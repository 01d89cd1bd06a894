"""Computable capacity bounds and large-deviation rates.

Capacities themselves are not computable.  Everything here is either an upper
bound (Sobolev norm of an explicit test function, or the tail-event estimate
with user-chosen constants) or the lower bound P(A)^{1/q}.  Quantities that
underflow double precision at small ε are available in log form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import log_ndtr, logsumexp

from .variation import ConstraintError


def poly_q_norm_bound(degree: int, q: float, l2_norm: float) -> float:
    """Hypercontractive bound ‖F‖_q ≤ (N+1)(q-1)^{N/2}‖F‖_2 for degree-N chaos."""
    if not q > 2:
        raise ValueError(f"q must exceed 2, got {q}")
    if degree < 0 or l2_norm < 0:
        raise ValueError("degree and l2_norm must be nonnegative")
    return (degree + 1) * (q - 1) ** (degree / 2) * l2_norm


def poly_derivative_bound(degree: int, i: int, l2_norm: float) -> float:
    """‖D^i F‖_2 ≤ N^{(i+1)/2}‖F‖_2 for a polynomial functional of degree N."""
    if i > degree:
        raise ValueError(f"derivative order {i} exceeds degree {degree}")
    if i < 0 or l2_norm < 0:
        raise ValueError("order and l2_norm must be nonnegative")
    if i == 0:
        return float(l2_norm)
    return degree ** ((i + 1) / 2) * l2_norm


@dataclass(frozen=True)
class TailParams:
    h: float
    p: float
    gamma: float
    theta: float
    N_tilde: int
    q: float
    N: int
    d: int
    lam: float
    m: int
    C1: float = 1.0
    C2: float = 1.0
    g_coeffs: tuple = ()

    def __post_init__(self):
        lo, hi = theta_interval(self.h, self.p)
        if not lo < self.theta < hi:
            raise ConstraintError(
                f"theta-interval violated: theta={self.theta} not in (({self.p}(2h+1)/6 - 1)^+, hp - 1) = ({lo}, {hi})"
            )
        if not self.gamma > self.p - 1:
            raise ConstraintError(f"gamma > p - 1 violated: gamma={self.gamma}, p={self.p}")
        floor = n_tilde_floor(self.h, self.p, self.theta, self.N)
        if not self.N_tilde > floor:
            raise ConstraintError(
                f"N_tilde bound violated: N_tilde={self.N_tilde} must exceed max(N/2, 1/(2(h-(theta+1)/p))) = {floor}"
            )
        if not self.q > 1 or self.N < 0 or not self.lam > 0 or self.m < 0:
            raise ConstraintError("q > 1, N >= 0, lambda > 0 and m >= 0 required")
        if not (self.C1 > 0 and self.C2 > 0):
            raise ConstraintError("C1, C2 must be positive")

    @property
    def coefficients(self) -> tuple:
        # default g: degree N+1, unit coefficients
        return self.g_coeffs or (1.0,) * (self.N + 2)


def theta_interval(h: float, p: float) -> tuple[float, float]:
    return max(p * (2 * h + 1) / 6 - 1, 0.0), h * p - 1


def n_tilde_floor(h: float, p: float, theta: float, N: int) -> float:
    gap = h - (theta + 1) / p
    return max(N / 2, 1.0 / (2.0 * gap))


def smallest_n_tilde(h: float, p: float, theta: float, N: int) -> int:
    return math.floor(n_tilde_floor(h, p, theta, N)) + 1


def decay_exponent(h: float, p: float, theta: float, N_tilde: float, i: int) -> float:
    """2iÑ(h - (θ+1)/p) - 1, the power of 2^{-m} in the difference bound."""
    return 2 * i * N_tilde * (h - (theta + 1) / p) - 1


def _log_poly(coeffs, x):
    # log Σ_k c_k x^k, positive coefficients, x > 0
    terms = [math.log(c) + k * math.log(x) for k, c in enumerate(coeffs) if c > 0]
    return float(logsumexp(terms))


def log_constant(params: TailParams, i: int) -> float:
    """log C_i = log(C1 C2^Ñ g(Ñ; N) Ñ^{iÑ})."""
    Nt = params.N_tilde
    return (math.log(params.C1) + Nt * math.log(params.C2)
            + _log_poly(params.coefficients, Nt) + i * Nt * math.log(Nt))


def _log_tail(log_c, lam, N_tilde, m, exponent, kind):
    out = log_c - 2 * N_tilde * math.log(lam)
    if kind == "difference":
        out -= m * exponent * math.log(2.0)
    elif kind != "single":
        raise ValueError(f"kind must be 'difference' or 'single', got {kind!r}")
    return out


def log_tail_capacity_bound(kind: str, params: TailParams, i: int) -> float:
    if i not in (1, 2, 3):
        raise ValueError("level i must be 1, 2 or 3")
    e = decay_exponent(params.h, params.p, params.theta, params.N_tilde, i)
    return _log_tail(log_constant(params, i), params.lam, params.N_tilde, params.m, e, kind)


def tail_capacity_bound(kind: str, params: TailParams, i: int) -> float:
    """Upper bound on the capacity of {ρ_i(w^(m+1), w^(m)) > λ} (difference)
    or {ρ_i(w^(m)) > λ} (single)."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_tail_capacity_bound(kind, params, i)))


def summable_by_series(h, p, theta, N_tilde, i, terms=64) -> bool:
    """Geometric-series test of Σ_m bound(m): convergent iff successive terms shrink.

    Works on raw parameters (no admissibility check) so that it can be
    compared against the closed-form condition outside the admissible set.
    """
    e = decay_exponent(h, p, theta, N_tilde, i)
    logs = np.array([_log_tail(0.0, 1.0, N_tilde, m, e, "difference") for m in range(terms)])
    ratios = np.diff(logs)
    return bool(np.all(ratios < 0))


def summable_analytic(h, p, theta, N_tilde, i) -> bool:
    return 2 * i * N_tilde * (h - (theta + 1) / p) > 1


def log_capacity_upper_1d(b: float, eps: float, q: float, N: int, lam: float | None = None) -> float:
    """log of Σ_{i≤N} (λε)^i exp((q/2)(λε)^2 - λb), the Sobolev norm of exp(λεx - λb)."""
    if not (b > 0 and eps > 0):
        raise ValueError("b and eps must be positive")
    if not q > 2:
        raise ValueError(f"q must exceed 2, got {q}")
    if N < 0:
        raise ValueError("N must be nonnegative")
    lam = b / (q * eps**2) if lam is None else lam
    if not lam > 0:
        raise ValueError("lambda must be positive")
    le = lam * eps
    return float(logsumexp([i * math.log(le) for i in range(N + 1)])) + 0.5 * q * le**2 - lam * b


def capacity_upper_1d(b: float, eps: float, q: float, N: int, lam: float | None = None) -> float:
    return math.exp(log_capacity_upper_1d(b, eps, q, N, lam))


def capacity_lower_from_prob(prob: float, q: float) -> float:
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"probability {prob} outside [0, 1]")
    return prob ** (1.0 / q)


def log_gaussian_tail(b: float, eps: float) -> float:
    """log P(εX > b) for standard normal X."""
    return float(log_ndtr(-b / eps))


def log_capacity_lower_1d(b: float, eps: float, q: float) -> float:
    return log_gaussian_tail(b, eps) / q


def rate_fd(y, sigma) -> float:
    """½ yᵀΣ⁻¹y via a Cholesky solve."""
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (y.size, y.size) or not np.allclose(sigma, sigma.T, rtol=1e-12, atol=0):
        raise ValueError("sigma must be a symmetric matrix matching y")
    try:
        c = linalg.cho_factor(sigma)
    except linalg.LinAlgError as exc:
        raise ValueError("sigma is not positive definite") from exc
    return 0.5 * float(y @ linalg.cho_solve(c, y))


def cm_energy_bm(times, path) -> float:
    """½ Σ |Δw|²/Δt: Cameron-Martin energy of a polyline for Brownian motion."""
    times = np.asarray(times, dtype=float)
    path = np.asarray(path, dtype=float)
    if path.ndim == 1:
        path = path[:, None]
    if not np.allclose(path[0], 0.0):
        raise ValueError("path must start at the origin")
    dt = np.diff(times)
    if np.any(dt <= 0):
        raise ValueError("times must be strictly increasing")
    dw = np.diff(path, axis=0)
    return 0.5 * float(np.sum(np.sum(dw * dw, axis=1) / dt))


@dataclass(frozen=True)
class SlopeFit:
    limit: float
    sequence: np.ndarray
    richardson: float
    residuals: np.ndarray
    coefficients: np.ndarray


def ldp_slope_fit(eps, values=None, log_values=None) -> SlopeFit:
    """Extrapolate s(ε) = ε² log value(ε) to ε → 0.

    Least squares on the basis {1, ε², ε² log ε}, which absorbs constant and
    polynomial prefactors of the value exactly.  ``richardson`` eliminates an
    O(ε²) term using the two smallest ε.
    """
    eps = np.asarray(eps, dtype=float)
    if log_values is None:
        values = np.asarray(values, dtype=float)
        if np.any(values <= 0):
            raise ValueError("values must be positive")
        log_values = np.log(values)
    log_values = np.asarray(log_values, dtype=float)
    if eps.size < 3 or eps.size != log_values.size:
        raise ValueError("need at least 3 (eps, value) rows")
    if not np.all(np.isfinite(log_values)):
        raise ValueError("values must be positive and finite")
    s = eps**2 * log_values
    A = np.column_stack([np.ones_like(eps), eps**2, eps**2 * np.log(eps)])
    coef, *_ = np.linalg.lstsq(A, s, rcond=None)
    order = np.argsort(eps)
    e1, e2 = eps[order[0]], eps[order[1]]
    s1, s2 = s[order[0]], s[order[1]]
    rich = (s1 * e2**2 - s2 * e1**2) / (e2**2 - e1**2)
    return SlopeFit(float(coef[0]), s, float(rich), s - A @ coef, coef)


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    from scipy.stats import binomtest

    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def t_interval(x, confidence: float = 0.95) -> tuple[float, float]:
    """Student-t interval for the mean of ``x``."""
    from scipy.stats import t

    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float("nan"), float("nan")
    mean = float(np.mean(x))
    half = float(t.ppf(0.5 + confidence / 2, x.size - 1) * np.std(x, ddof=1) / np.sqrt(x.size))
    return mean - half, mean + half


def ldp_n_tilde(eps: float, h: float, p: float, theta: float, N: int) -> int:
    """Ñ = [ε^{-2}] (integer part), raised to the smallest admissible value if needed."""
    # round first so that e.g. 0.05**-2 = 399.99999999999994 counts as 400
    return max(math.floor(round(eps**-2, 9)), smallest_n_tilde(h, p, theta, N))
