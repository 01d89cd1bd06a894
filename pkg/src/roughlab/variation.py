"""Dyadic rho functionals and the grid-restricted p-variation distance.

All tensor norms are Frobenius norms of the flattened level.  ``dp_exact`` is
the supremum over partitions whose points lie on a fixed dyadic grid; it is
not the supremum over arbitrary partitions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lift import DyadicLift
from .tensor import product

MAX_GRID_LEVEL = 11


class ConstraintError(ValueError):
    """A standing parameter assumption (named in the message) is violated."""


@dataclass(frozen=True)
class MetricParams:
    p: float
    gamma: float
    n_max: int
    hl_constant: float = 1.0

    def __post_init__(self):
        if not 2.0 < self.p < 4.0:
            raise ConstraintError(f"p in (2, 4) violated: p={self.p}")
        if not self.gamma > self.p - 1.0:
            raise ConstraintError(f"gamma > p - 1 violated: gamma={self.gamma}, p={self.p}")
        if self.n_max < 1:
            raise ConstraintError("n_max >= 1 violated")
        if not self.hl_constant > 0:
            raise ConstraintError("hl_constant > 0 violated")

    def check_hurst(self, h: float) -> None:
        if not h * self.p > 1.0:
            raise ConstraintError(f"hp > 1 violated: h={h}, p={self.p}, hp={h * self.p}")


def _norm(x, rank):
    axes = tuple(range(-rank, 0))
    return np.sqrt(np.sum(x * x, axis=axes))


def _check_pair(a, b, i, n_max):
    if not 1 <= i <= 3:
        raise ValueError("level i must be 1, 2 or 3")
    if i > a.depth:
        raise ValueError(f"lift has depth {a.depth} < {i}")
    if a.n_max < n_max:
        raise ValueError(f"lift n_max={a.n_max} below requested {n_max}")
    if b is not None:
        if b.dim != a.dim:
            raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
        if i > b.depth or b.n_max < n_max:
            raise ValueError("second lift too shallow")


def rho_terms(a: DyadicLift, b: DyadicLift | None, i: int, params: MetricParams) -> np.ndarray:
    """Per-level terms n^γ Σ_k |a^i - b^i|^{p/i}, n = 1..n_max (last axis)."""
    _check_pair(a, b, i, params.n_max)
    terms = []
    for n in range(1, params.n_max + 1):
        x = a.levels[n][i - 1]
        if b is not None:
            x = x - b.levels[n][i - 1]
        norms = _norm(x, i)
        terms.append(n**params.gamma * np.sum(norms ** (params.p / i), axis=-1))
    return np.stack(terms, axis=-1)


def rho(a: DyadicLift, b: DyadicLift | None, i: int, params: MetricParams):
    """ρ_i(a, b); with ``b=None`` the distance to the trivial lift (1,0,0,0)."""
    total = np.sum(rho_terms(a, b, i, params), axis=-1)
    out = total ** (i / params.p)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class RhoSet:
    """The ρ values entering the Hambly-Lyons control of d_p."""

    d1: float
    d2: float
    d3: float
    a1: float
    b1: float
    a2: float
    b2: float


def rho_set(a: DyadicLift, b: DyadicLift, params: MetricParams) -> RhoSet:
    return RhoSet(
        rho(a, b, 1, params), rho(a, b, 2, params), rho(a, b, 3, params),
        rho(a, None, 1, params), rho(b, None, 1, params),
        rho(a, None, 2, params), rho(b, None, 2, params),
    )


def hl_terms(r: RhoSet):
    s1 = r.a1 + r.b1
    s2 = r.a2 + r.b2
    return (r.d1, r.d2, r.d1 * s1, r.d3, r.d2 * s1, r.d1 * (s2 + s1 * s1))


def hl_bound(r: RhoSet, params: MetricParams):
    vals = [np.asarray(v, dtype=float) for v in (r.d1, r.d2, r.d3, r.a1, r.b1, r.a2, r.b2)]
    if any(np.any(v < 0) for v in vals):
        raise ValueError("rho values must be nonnegative")
    out = params.hl_constant * np.max(np.stack(np.broadcast_arrays(*hl_terms(r))), axis=0)
    return float(out) if np.ndim(out) == 0 else out


def block_cost_columns(a: DyadicLift, b: DyadicLift, p: float, grid_level: int):
    """Yield, for l = 1..2^g, the costs |Δ^i_{j,l}|^{p/i} of every block [t_j, t_l], j < l.

    Each item is a tuple over levels i = 1..depth of arrays shaped
    (batch..., l).  Block tensors are accumulated by right Chen
    multiplication, one grid interval at a time.
    """
    if grid_level > MAX_GRID_LEVEL:
        raise ValueError(f"grid_level {grid_level} over budget (max {MAX_GRID_LEVEL})")
    if a.n_max < grid_level or b.n_max < grid_level:
        raise ValueError("lifts must be resolved down to grid_level")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    depth = min(a.depth, b.depth)
    xa = a.levels[grid_level][:depth]
    xb = b.levels[grid_level][:depth]

    K = 2**grid_level
    acc_a = tuple(np.empty_like(v) for v in xa)
    acc_b = tuple(np.empty_like(v) for v in xb)

    def advance(acc, x, l):
        blk = (Ellipsis, slice(0, l - 1))
        new = tuple(v[(Ellipsis, slice(l - 1, l)) + (slice(None),) * (i + 1)] for i, v in enumerate(x))
        if l > 1:
            old = tuple(v[blk + (slice(None),) * (i + 1)] for i, v in enumerate(acc))
            for i, v in enumerate(product(old, new)):
                acc[i][blk + (slice(None),) * (i + 1)] = v
        for i, v in enumerate(new):
            acc[i][(Ellipsis, slice(l - 1, l)) + (slice(None),) * (i + 1)] = v

    for l in range(1, K + 1):
        advance(acc_a, xa, l)
        advance(acc_b, xb, l)
        yield tuple(
            _norm(u[(Ellipsis, slice(0, l)) + (slice(None),) * (i + 1)]
                  - v[(Ellipsis, slice(0, l)) + (slice(None),) * (i + 1)], i + 1) ** (p / (i + 1))
            for i, (u, v) in enumerate(zip(acc_a, acc_b))
        )


_pow = np.vectorize(math.pow, otypes=[float])


def finalize(optimum, p: float) -> np.ndarray:
    """Map per-level optima (axis 0) to (optimum_i)^{i/p}.

    Uses scalar libm pow element by element, so the result does not depend on
    array shape (numpy's vectorised pow may differ in the last ulp).
    """
    optimum = np.asarray(optimum, dtype=float)
    exps = np.array([(i + 1) / p for i in range(optimum.shape[0])]).reshape((-1,) + (1,) * (optimum.ndim - 1))
    return _pow(optimum, exps)


def dp_optimum(a: DyadicLift, b: DyadicLift, p: float, grid_level: int) -> np.ndarray:
    """Per-level max over grid partitions of Σ|Δ^i|^{p/i}, shape (depth, batch...)."""
    K = 2**grid_level
    best = None
    for l, costs in enumerate(block_cost_columns(a, b, p, grid_level), start=1):
        if best is None:
            best = np.zeros((len(costs),) + costs[0].shape[:-1] + (K + 1,))
        for i, c in enumerate(costs):
            best[i, ..., l] = np.max(best[i, ..., :l] + c, axis=-1)
    return best[..., K]


def dp_levels(a: DyadicLift, b: DyadicLift, p: float, grid_level: int) -> np.ndarray:
    """Per-level (optimum_i)^{i/p}, shape (depth, batch...)."""
    return finalize(dp_optimum(a, b, p, grid_level), p)


def dp_exact(a: DyadicLift, b: DyadicLift, p: float, grid_level: int):
    """Grid-restricted p-variation distance max_i (optimum_i)^{i/p}."""
    out = np.max(dp_levels(a, b, p, grid_level), axis=0)
    return float(out) if np.ndim(out) == 0 else out
