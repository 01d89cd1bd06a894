"""Exact simulation of fractional Brownian motion on dyadic grids.

Samples are drawn by Cholesky factorisation of the (Toeplitz) covariance of
the grid increments.  Every sample index owns a Philox counter substream, and
the factor is applied in fixed blocks of ``SAMPLE_BLOCK`` indices, so a
sample's values depend only on (model, M, d, seed, index) and never on which
other samples were requested alongside it.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

MAX_LEVEL = 14
SAMPLE_BLOCK = 256
JITTER_BASE = 1e-14
JITTER_STEPS = 3


class CovarianceError(RuntimeError):
    """The Gram matrix could not be factorised within the jitter policy."""


class HurstRangeError(ValueError):
    pass


@dataclass(frozen=True)
class CovarianceModel:
    hurst: float
    kind: str = "fbm"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind != "fbm":
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if not 0.25 < self.hurst <= 1.0:
            raise HurstRangeError(
                f"hurst={self.hurst} outside (1/4, 1]: for h <= 1/4 no subsequence of the "
                "dyadic lifts converges, so the canonical rough path lift does not exist"
            )
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        a = 2.0 * self.hurst
        return self.scale * 0.5 * (s**a + t**a - np.abs(t - s) ** a)


def covariance(model: CovarianceModel, s, t):
    """R(s, t) for times in [0, 1]."""
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any((s_arr < 0) | (s_arr > 1) | (t_arr < 0) | (t_arr > 1)):
        raise ValueError("times must lie in [0, 1]")
    out = model(s_arr, t_arr)
    return float(out) if out.ndim == 0 else out


def increment_covariance(model: CovarianceModel, M: int) -> np.ndarray:
    """Covariance of the 2^M increments B_{k/2^M} - B_{(k-1)/2^M}."""
    K = 2**M
    lag = np.arange(K, dtype=float)
    a = 2.0 * model.hurst
    row = 0.5 * (np.abs(lag + 1) ** a + np.abs(lag - 1) ** a - 2.0 * lag**a)
    return model.scale * 2.0 ** (-a * M) * toeplitz(row)


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray = field(repr=False)
    jitter: float


@functools.lru_cache(maxsize=32)
def cholesky_factor(model: CovarianceModel, M: int) -> CholeskyFactor:
    """Cholesky factor of the increment covariance with bounded ridge escalation."""
    if not 1 <= M <= MAX_LEVEL:
        raise ValueError(f"level M={M} outside [1, {MAX_LEVEL}]")
    C = increment_covariance(model, M)
    try:
        return CholeskyFactor(np.linalg.cholesky(C), 0.0)
    except np.linalg.LinAlgError:
        pass
    ridge = JITTER_BASE * np.trace(C) / C.shape[0]
    for _ in range(JITTER_STEPS + 1):
        try:
            L = np.linalg.cholesky(C + ridge * np.eye(C.shape[0]))
            return CholeskyFactor(L, ridge)
        except np.linalg.LinAlgError:
            ridge *= 10.0
    raise CovarianceError(f"Cholesky failed for {model} at M={M} after jitter escalation")


@dataclass(frozen=True, eq=False)
class GridSample:
    level: int
    values: np.ndarray = field(repr=False)
    seed: int
    model: CovarianceModel
    index: int = 0

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(2**self.level + 1) / 2.0**self.level


def _substream(seed: int, index: int) -> np.random.Generator:
    # index lives in the top counter word, so substreams never overlap
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, index]))


def _sample_block(model, M, d, seed, block):
    L = cholesky_factor(model, M).lower
    K = 2**M
    start = block * SAMPLE_BLOCK
    z = np.stack([_substream(seed, i).standard_normal((d, K)) for i in range(start, start + SAMPLE_BLOCK)])
    inc = z.reshape(-1, K) @ L.T
    out = np.zeros((SAMPLE_BLOCK, d, K + 1))
    np.cumsum(inc.reshape(SAMPLE_BLOCK, d, K), axis=-1, out=out[..., 1:])
    return np.swapaxes(out, 1, 2)


def sample_values(model: CovarianceModel, M: int, d: int, n: int, seed: int, start: int = 0) -> np.ndarray:
    """Grid values for sample indices ``start .. start+n-1``, shape (n, 2^M+1, d)."""
    if n < 1:
        raise ValueError("sample count must be positive")
    if d < 1:
        raise ValueError("dimension must be positive")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    first, last = start // SAMPLE_BLOCK, (start + n - 1) // SAMPLE_BLOCK
    blocks = [_sample_block(model, M, d, seed, b) for b in range(first, last + 1)]
    stacked = np.concatenate(blocks) if len(blocks) > 1 else blocks[0]
    offset = start - first * SAMPLE_BLOCK
    return np.ascontiguousarray(stacked[offset : offset + n])


def sample_paths(model: CovarianceModel, M: int, d: int, n: int, seed: int, start: int = 0) -> list[GridSample]:
    values = sample_values(model, M, d, n, seed, start)
    return [GridSample(M, values[j], seed, model, start + j) for j in range(n)]


@dataclass(frozen=True)
class LongMemoryReport:
    """Smallest constants for which both long-memory inequalities hold on the grid."""

    first_constant: float
    second_constant: float
    argmax_triple: tuple[float, float, float]
    n_near_max: int

    @property
    def constant(self) -> float:
        return max(self.first_constant, self.second_constant)

    def holds_with(self, c: float, tolerance: float = 0.0) -> bool:
        return self.constant <= c + tolerance


def _grid_triples(M):
    """All (s, t, tau) on the level-M grid with s < t, t + tau <= 1, (t-s) <= tau."""
    K = 2**M
    i, j, k = np.meshgrid(np.arange(K + 1), np.arange(K + 1), np.arange(1, K + 1), indexing="ij")
    mask = (i < j) & (j + k <= K) & (j - i <= k)
    return i[mask], j[mask], k[mask]


def long_memory_ratios(model: CovarianceModel, M: int):
    """Per-triple ratios |E[(B_t-B_s)(B_{t+τ}-B_{s+τ})]| / (τ^{2h}((t-s)/τ)^2)."""
    i, j, k = _grid_triples(M)
    h = 2.0**-M
    s, t, tau = i * h, j * h, k * h
    R = model
    cross = R(t, t + tau) - R(t, s + tau) - R(s, t + tau) + R(s, s + tau)
    ratio = np.abs(cross) / (tau ** (2 * model.hurst) * ((t - s) / tau) ** 2)
    return (i, j, k), ratio


def verify_long_memory(model: CovarianceModel, M: int, tolerance: float = 0.0) -> LongMemoryReport:
    """Measure the minimal C_h on all level-M grid pairs and triples.

    Triples whose ratio lies within ``tolerance`` of the maximum are counted
    in ``n_near_max``.
    """
    K = 2**M
    a, b = np.triu_indices(K + 1, k=1)
    s, t = a / K, b / K
    var = model(t, t) + model(s, s) - 2.0 * model(s, t)
    first = float(np.max(var / np.abs(t - s) ** (2 * model.hurst)))
    (i, j, k), ratio = long_memory_ratios(model, M)
    at = int(np.argmax(ratio))
    triple = (i[at] / K, j[at] / K, k[at] / K)
    near = int(np.count_nonzero(ratio >= ratio[at] - tolerance))
    return LongMemoryReport(first, float(ratio[at]), triple, near)
