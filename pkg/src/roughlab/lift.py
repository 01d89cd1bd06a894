"""Dyadic piecewise-linear interpolation and its level-3 lift.

A ``DyadicLift`` stores, for every dyadic level n = 0..n_max, the signature of
the level-m polyline over each interval [(k-1)/2^n, k/2^n].  Arrays may carry
leading batch axes (one lift per sample), which is how the Monte Carlo code
uses them; ``interval_signature`` needs an unbatched lift.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fbm import GridSample
from .tensor import MAX_DEPTH, TruncatedTensor, merge_pairs, product, segment_levels

DEFAULT_BUDGET = 2**27
MAX_EXTRA_LEVELS = 4


class ResourceLimitError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Polyline:
    level: int
    vertices: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.arange(2**self.level + 1) / 2.0**self.level

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, self.vertices[:, c]) for c in range(self.vertices.shape[1])], axis=-1)


def coarsen(values: np.ndarray, M: int, m: int) -> np.ndarray:
    """Vertices at level m of grid values sampled at level M (axis -2)."""
    if m > M:
        raise ValueError(f"interpolation level m={m} exceeds sample level M={M}")
    if m < 0:
        raise ValueError("interpolation level must be nonnegative")
    return values[..., :: 2 ** (M - m), :]


def interpolate(sample: GridSample, m: int) -> Polyline:
    return Polyline(m, coarsen(sample.values, sample.level, m))


def level_signatures(vertices: np.ndarray, m: int, n: int, depth: int = MAX_DEPTH):
    """Signatures of the level-m polyline over the 2^n level-n dyadic intervals.

    ``vertices`` has shape (..., 2^m+1, d).  Level 1 is always the exact vertex
    increment (no summation round-off), so w^(m) and w^(m+1) agree bit-for-bit
    at level 1 on coarse intervals.
    """
    inc = np.diff(vertices, axis=-2)
    if n >= m:
        split = 2 ** (n - m)
        return segment_levels(np.repeat(inc, split, axis=-2) / split, depth)
    levels = segment_levels(inc, depth)
    for _ in range(m - n):
        levels = merge_pairs(levels)
    coarse = np.diff(vertices[..., :: 2 ** (m - n), :], axis=-2)
    return (coarse,) + levels[1:]


def _build_tree(vertices, m, n_max, depth):
    finest = max(m, n_max)
    levels = level_signatures(vertices, m, finest, depth)
    tree = {finest: levels}
    for n in range(finest - 1, -1, -1):
        levels = merge_pairs(levels)
        if n < m:
            coarse = np.diff(vertices[..., :: 2 ** (m - n), :], axis=-2)
            levels = (coarse,) + levels[1:]
        tree[n] = levels
    return tuple(tree[n] for n in range(n_max + 1))


@dataclass(frozen=True, eq=False)
class DyadicLift:
    m: int
    n_max: int
    vertices: np.ndarray = field(repr=False)
    levels: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[-1]

    @property
    def depth(self) -> int:
        return len(self.levels[0])

    @property
    def batch_shape(self) -> tuple:
        return self.vertices.shape[:-2]

    def node(self, n: int, k: int):
        """Level arrays of interval k (1-based) at dyadic level n."""
        if not 0 <= n <= self.n_max:
            raise IndexError(f"level n={n} outside [0, {self.n_max}]")
        if not 1 <= k <= 2**n:
            raise IndexError(f"interval k={k} outside [1, {2 ** n}]")
        return tuple(x[(Ellipsis, k - 1) + (slice(None),) * (i + 1)] for i, x in enumerate(self.levels[n]))

    def dilate(self, eps: float) -> "DyadicLift":
        if not eps > 0:
            raise ValueError("dilation factor must be positive")
        levels = tuple(tuple(eps ** (i + 1) * x for i, x in enumerate(lv)) for lv in self.levels)
        return DyadicLift(self.m, self.n_max, eps * self.vertices, levels)

    def to_json(self) -> str:
        if self.batch_shape:
            raise ValueError("only unbatched lifts serialise to JSON")
        nodes = [[np.concatenate([x[k].ravel() for x in lv]).tolist() for k in range(2**n)] for n, lv in enumerate(self.levels)]
        return json.dumps(
            {"m": self.m, "n_max": self.n_max, "d": self.dim, "depth": self.depth,
             "vertices": self.vertices.tolist(), "tree": nodes}
        )

    @classmethod
    def from_json(cls, text: str) -> "DyadicLift":
        obj = json.loads(text)
        d, depth = int(obj["d"]), int(obj["depth"])
        sizes = [d ** (i + 1) for i in range(depth)]
        levels = []
        for nodes in obj["tree"]:
            flat = np.asarray(nodes, dtype=float)
            parts, pos = [], 0
            for i, size in enumerate(sizes):
                parts.append(flat[:, pos : pos + size].reshape((-1,) + (d,) * (i + 1)))
                pos += size
            levels.append(tuple(parts))
        return cls(int(obj["m"]), int(obj["n_max"]), np.asarray(obj["vertices"], dtype=float), tuple(levels))

    def save_npz(self, path) -> None:
        arrays = {f"n{n}_l{i + 1}": x for n, lv in enumerate(self.levels) for i, x in enumerate(lv)}
        header = np.array([self.m, self.n_max, self.dim, self.depth])
        np.savez(path, header=header, vertices=self.vertices, **arrays)

    @classmethod
    def load_npz(cls, path) -> "DyadicLift":
        with np.load(path) as f:
            m, n_max, _, depth = (int(v) for v in f["header"])
            levels = tuple(tuple(f[f"n{n}_l{i + 1}"] for i in range(depth)) for n in range(n_max + 1))
            return cls(m, n_max, f["vertices"], levels)


def lift_vertices(vertices, m: int, n_max: int | None = None, depth: int = MAX_DEPTH,
                  budget: int = DEFAULT_BUDGET) -> DyadicLift:
    """Lift a (possibly batched) level-m vertex table to a full dyadic tree."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape[-2] != 2**m + 1:
        raise ValueError(f"expected {2 ** m + 1} vertices for level {m}, got {vertices.shape[-2]}")
    n_max = m if n_max is None else n_max
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if not 1 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must be in 1..{MAX_DEPTH}")
    d = vertices.shape[-1]
    batch = int(np.prod(vertices.shape[:-2], dtype=np.int64))
    cost = batch * d**depth * 2 ** max(m, n_max)
    if cost > budget:
        raise ResourceLimitError(f"lift needs ~{cost} tensor entries, budget is {budget}")
    return DyadicLift(m, n_max, vertices, _build_tree(vertices, m, n_max, depth))


def lift_dyadic(sample: GridSample, m: int, n_max: int | None = None, depth: int = MAX_DEPTH,
                budget: int = DEFAULT_BUDGET) -> DyadicLift:
    n_max = sample.level if n_max is None else n_max
    if n_max > sample.level + MAX_EXTRA_LEVELS:
        raise ValueError(f"n_max={n_max} exceeds sample level + {MAX_EXTRA_LEVELS}")
    return lift_vertices(interpolate(sample, m).vertices, m, n_max, depth, budget)


def interval_signature(lift: DyadicLift, n: int, k: int) -> TruncatedTensor:
    if lift.batch_shape:
        raise ValueError("interval_signature needs an unbatched lift")
    if lift.depth != MAX_DEPTH:
        raise ValueError("interval_signature needs a depth-3 lift")
    return TruncatedTensor(*lift.node(n, k))


def fold(levels_seq):
    """Left-to-right Chen product of a sequence of level tuples."""
    it = iter(levels_seq)
    acc = next(it)
    for x in it:
        acc = product(acc, x)
    return acc


def chen_defect(lift: DyadicLift) -> float:
    """Largest entrywise |parent - left ⊗ right| over the whole tree."""
    worst = 0.0
    for n in range(1, lift.n_max + 1):
        merged = merge_pairs(lift.levels[n])
        for x, y in zip(merged, lift.levels[n - 1]):
            worst = max(worst, float(np.max(np.abs(x - y))))
    return worst
