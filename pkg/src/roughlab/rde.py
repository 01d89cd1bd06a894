"""ODEs driven by dyadic polylines (Wong-Zakai approximations of RDEs).

Along a straight segment with increment Δ the equation dx = Σ_α V_α(x) dw^α
becomes the autonomous ODE dx/du = Σ_α V_α(x) Δ_α on u ∈ [0, 1], integrated
here with classical fixed-step RK4.  All solvers take batched drivers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fbm import GridSample
from .lift import coarsen

MAX_DEGREE = 3
DEFAULT_BOUND = 1e8

_DEGREE_NAMES = ("constant", "linear", "quadratic", "cubic")


class BlowUpError(FloatingPointError):
    def __init__(self, time: float, message: str = ""):
        self.time = time
        super().__init__(message or f"solution left the bounded region at t={time:.6g}")


@dataclass(frozen=True, eq=False)
class VectorFieldSet:
    """d polynomial fields on R^N of degree ≤ 3.

    ``coefficients[k]`` has shape (d, N) + (N,)*k and holds the degree-k part:
    V_α(x)_j = Σ_k Σ C[k][α, j, i1..ik] x_i1 ... x_ik.
    """

    d: int
    N: int
    coefficients: tuple = field(repr=False)

    def __post_init__(self):
        if self.d < 1 or self.N < 1:
            raise ValueError("d and N must be positive")
        if len(self.coefficients) > MAX_DEGREE + 1:
            raise ValueError(f"degree exceeds {MAX_DEGREE}")
        coeffs = []
        for k, c in enumerate(self.coefficients):
            c = np.zeros((self.d, self.N) + (self.N,) * k) if c is None else np.asarray(c, dtype=float)
            if c.shape != (self.d, self.N) + (self.N,) * k:
                raise ValueError(f"{_DEGREE_NAMES[k]} coefficients: expected shape {(self.d, self.N) + (self.N,) * k}, got {c.shape}")
            if not np.isfinite(c).all():
                raise ValueError("coefficients must be finite")
            coeffs.append(c)
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @classmethod
    def from_config(cls, d: int, N: int, **tables) -> "VectorFieldSet":
        """Build from flat row-major coefficient lists keyed by degree name."""
        unknown = set(tables) - set(_DEGREE_NAMES)
        if unknown:
            raise ValueError(f"unknown coefficient tables {sorted(unknown)}")
        top = max((k for k, name in enumerate(_DEGREE_NAMES) if tables.get(name) is not None), default=0)
        coeffs = []
        for k in range(top + 1):
            flat = tables.get(_DEGREE_NAMES[k])
            shape = (d, N) + (N,) * k
            if flat is None:
                coeffs.append(None)
                continue
            flat = np.asarray(flat, dtype=float)
            if flat.size != int(np.prod(shape)):
                raise ValueError(f"{_DEGREE_NAMES[k]} needs {int(np.prod(shape))} entries, got {flat.size}")
            coeffs.append(flat.reshape(shape))
        return cls(d, N, tuple(coeffs))

    @classmethod
    def linear(cls, matrices) -> "VectorFieldSet":
        A = np.asarray(matrices, dtype=float)
        d, N = A.shape[0], A.shape[1]
        return cls(d, N, (None, A))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def eval(self, x) -> np.ndarray:
        """Field values, shape (..., d, N)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.d, self.N))
        for k, c in enumerate(self.coefficients):
            t = np.broadcast_to(c, x.shape[:-1] + c.shape)
            for _ in range(k):
                t = np.einsum("...i,...i->...", t, _expand(x, t.ndim))
            out = out + t
        return out

    def jacobian(self, x) -> np.ndarray:
        """∂V_α(x)_j/∂x_l, shape (..., d, N, N)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.d, self.N, self.N))
        for k, c in enumerate(self.coefficients):
            if k == 0:
                continue
            # differentiate in each slot: sum of c with one slot left free
            for slot in range(k):
                t = np.moveaxis(c, 2 + slot, -1)
                t = np.broadcast_to(t, x.shape[:-1] + t.shape)
                for _ in range(k - 1):
                    t = np.einsum("...il,...i->...l", t, _expand(x, t.ndim - 1))
                out = out + t
        return out

    def drift(self, x, inc) -> np.ndarray:
        """Σ_α V_α(x) inc_α, shape (..., N)."""
        return np.einsum("...an,...a->...n", self.eval(x), inc)


def _expand(x, ndim):
    # x of shape (..., N) broadcast against a tensor whose last axis is contracted
    return x.reshape(x.shape[:-1] + (1,) * (ndim - x.ndim) + x.shape[-1:])


def _rk4_segment(V, x, inc, substeps):
    h = 1.0 / substeps
    for s in range(substeps):
        k1 = V.drift(x, inc)
        k2 = V.drift(x + 0.5 * h * k1, inc)
        k3 = V.drift(x + 0.5 * h * k2, inc)
        k4 = V.drift(x + h * k3, inc)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        yield s, x


def solve_polyline(x0, V: VectorFieldSet, vertices, substeps: int = 16, bound: float = DEFAULT_BOUND) -> np.ndarray:
    """Solve along the polyline through ``vertices`` (..., K+1, d), equally spaced on [0, 1].

    Returns states at the vertices, shape (..., K+1, N).
    """
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape[-1] != V.d:
        raise ValueError(f"driver has {vertices.shape[-1]} components, fields expect {V.d}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (V.N,):
        raise ValueError(f"x0 must have shape ({V.N},)")
    inc = np.diff(vertices, axis=-2)
    K = inc.shape[-2]
    batch = vertices.shape[:-2]
    out = np.empty(batch + (K + 1, V.N))
    x = np.broadcast_to(x0, batch + (V.N,)).copy()
    out[..., 0, :] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            for s, x in _rk4_segment(V, x, inc[..., k, :], substeps):
                if not (np.isfinite(x).all() and np.max(np.abs(x), initial=0.0) <= bound):
                    raise BlowUpError((k + (s + 1) / substeps) / K)
            out[..., k + 1, :] = x
    return out


@dataclass(frozen=True, eq=False)
class Solution:
    times: np.ndarray
    states: np.ndarray

    def to_rows(self):
        return [[float(t)] + [float(v) for v in row] for t, row in zip(self.times, self.states)]


def solve_along(x0, V: VectorFieldSet, sample: GridSample, m: int, substeps: int = 16,
                bound: float = DEFAULT_BOUND) -> Solution:
    vertices = coarsen(sample.values, sample.level, m)
    states = solve_polyline(x0, V, vertices, substeps, bound)
    return Solution(np.arange(2**m + 1) / 2.0**m, states)


def wz_distances(x0, V: VectorFieldSet, values, M: int, m_range, substeps: int = 16,
                 bound: float = DEFAULT_BOUND) -> np.ndarray:
    """sup_k |x^(m+1) - x^(m)| at the level-m vertices, shape (len(m_range), batch...)."""
    m_range = list(m_range)
    if max(m_range) + 1 > M:
        raise ValueError(f"m_range needs level {max(m_range) + 1} > sample level {M}")
    sols = {m: solve_polyline(x0, V, coarsen(values, M, m), substeps, bound)
            for m in sorted(set(m_range) | {m + 1 for m in m_range})}
    rows = []
    for m in m_range:
        diff = sols[m + 1][..., ::2, :] - sols[m]
        rows.append(np.max(np.sqrt(np.sum(diff * diff, axis=-1)), axis=-1))
    return np.stack(rows)


def wz_convergence(x0, V: VectorFieldSet, sample: GridSample, m_range, substeps: int = 16):
    """Rows (m, sup-distance between the level-(m+1) and level-m solutions)."""
    dist = wz_distances(x0, V, sample.values, sample.level, m_range, substeps)
    return [(m, float(v)) for m, v in zip(m_range, dist)]


@dataclass(frozen=True)
class ProbeResult:
    dp: np.ndarray
    distance: np.ndarray
    envelope: np.ndarray
    max_modulus: float


def continuity_probe(x0, V: VectorFieldSet, pairs, substeps: int = 16) -> ProbeResult:
    """Scatter of (driver distance, solution sup-distance) for lift pairs.

    ``pairs`` holds (lift_a, lift_b, dp) with unbatched lifts; solutions are
    compared at the vertices of the coarser of the two interpolation levels.
    The envelope at a point is the largest solution distance among pairs whose
    driver distance does not exceed it.
    """
    dps, dists = [], []
    for a, b, dp in pairs:
        level = min(a.m, b.m)
        xa = solve_polyline(x0, V, a.vertices, substeps)[:: 2 ** (a.m - level)]
        xb = solve_polyline(x0, V, b.vertices, substeps)[:: 2 ** (b.m - level)]
        dps.append(float(dp))
        dists.append(float(np.max(np.linalg.norm(xa - xb, axis=-1))))
    dps, dists = np.array(dps), np.array(dists)
    order = np.argsort(dps, kind="stable")
    env = np.empty_like(dists)
    env[order] = np.maximum.accumulate(dists[order]) if dists.size else dists
    pos = dps > 0
    modulus = float(np.max(dists[pos] / dps[pos])) if np.any(pos) else 0.0
    return ProbeResult(dps, dists, env, modulus)
