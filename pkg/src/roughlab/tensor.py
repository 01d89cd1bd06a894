"""Truncated tensor algebra T^(3)(R^d).

Level 0 is implicit (always 1).  The array-level helpers (``product``,
``segment_levels``, ``scale_levels``) work on tuples ``(l1, l2, l3)`` with
arbitrary leading batch axes; they may also be truncated to depth 1 or 2 by
passing shorter tuples.  ``TruncatedTensor`` is the single-value wrapper.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MAX_DEPTH = 3


def product(a, b):
    """Chen (truncated tensor) product of two level tuples.

    Both tuples must have the same depth; batch axes broadcast.
    """
    if len(a) != len(b):
        raise ValueError(f"depth mismatch: {len(a)} vs {len(b)}")
    out = [a[0] + b[0]]
    if len(a) > 1:
        out.append(a[1] + b[1] + a[0][..., :, None] * b[0][..., None, :])
    if len(a) > 2:
        out.append(
            a[2]
            + b[2]
            + a[0][..., :, None, None] * b[1][..., None, :, :]
            + a[1][..., :, :, None] * b[0][..., None, None, :]
        )
    return tuple(out)


def segment_levels(increment, depth=MAX_DEPTH):
    """Signature of the straight segment with the given increment(s).

    ``increment`` has shape ``(..., d)``; returns (Δ, Δ⊗Δ/2, Δ⊗Δ⊗Δ/6)
    truncated to ``depth``.
    """
    inc = np.asarray(increment, dtype=float)
    out = [inc.copy()]
    if depth > 1:
        out.append(inc[..., :, None] * inc[..., None, :] / 2.0)
    if depth > 2:
        out.append(inc[..., :, None, None] * inc[..., None, :, None] * inc[..., None, None, :] / 6.0)
    return tuple(out)


def scale_levels(eps, levels):
    return tuple(eps ** (i + 1) * x for i, x in enumerate(levels))


def merge_pairs(levels):
    """Chen-multiply adjacent pairs along the interval axis (axis -(rank+1)).

    Input arrays have shape ``(..., 2K, d, ...)``; output ``(..., K, d, ...)``.
    """
    left = tuple(x[(Ellipsis, slice(0, None, 2)) + (slice(None),) * (i + 1)] for i, x in enumerate(levels))
    right = tuple(x[(Ellipsis, slice(1, None, 2)) + (slice(None),) * (i + 1)] for i, x in enumerate(levels))
    return product(left, right)


@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """An element (1, level1, level2, level3) of T^(3)(R^d)."""

    level1: np.ndarray
    level2: np.ndarray
    level3: np.ndarray

    def __post_init__(self):
        l1 = np.asarray(self.level1, dtype=float)
        l2 = np.asarray(self.level2, dtype=float)
        l3 = np.asarray(self.level3, dtype=float)
        d = l1.shape[0] if l1.ndim == 1 else -1
        if d < 1 or l2.shape != (d, d) or l3.shape != (d, d, d):
            raise ValueError(f"inconsistent level shapes {l1.shape}, {l2.shape}, {l3.shape}")
        if not (np.isfinite(l1).all() and np.isfinite(l2).all() and np.isfinite(l3).all()):
            raise ValueError("tensor entries must be finite")
        object.__setattr__(self, "level1", l1)
        object.__setattr__(self, "level2", l2)
        object.__setattr__(self, "level3", l3)

    @property
    def dim(self) -> int:
        return self.level1.shape[0]

    @property
    def levels(self):
        return (self.level1, self.level2, self.level3)

    @classmethod
    def from_levels(cls, levels) -> "TruncatedTensor":
        return cls(*levels)

    def __mul__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        return chen_mul(self, other)

    def allclose(self, other: "TruncatedTensor", atol: float = 1e-12) -> bool:
        return self.dim == other.dim and all(
            np.allclose(x, y, rtol=0.0, atol=atol) for x, y in zip(self.levels, other.levels)
        )

    def max_abs_diff(self, other: "TruncatedTensor") -> float:
        return max(float(np.max(np.abs(x - y))) for x, y in zip(self.levels, other.levels))

    def flat(self) -> np.ndarray:
        return np.concatenate([x.ravel() for x in self.levels])

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "data": self.flat().tolist()})

    @classmethod
    def from_json(cls, text: str) -> "TruncatedTensor":
        obj = json.loads(text)
        d = int(obj["dim"])
        data = np.asarray(obj["data"], dtype=float)
        if data.shape != (d + d**2 + d**3,):
            raise ValueError(f"expected {d + d**2 + d**3} entries for dim {d}, got {data.size}")
        return cls(data[:d], data[d : d + d**2].reshape(d, d), data[d + d**2 :].reshape(d, d, d))

    def __repr__(self):
        return f"TruncatedTensor(dim={self.dim}, level1={self.level1.tolist()})"


def identity(d: int) -> TruncatedTensor:
    return TruncatedTensor(np.zeros(d), np.zeros((d, d)), np.zeros((d, d, d)))


def chen_mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return TruncatedTensor(*product(a.levels, b.levels))


def segment_signature(increment) -> TruncatedTensor:
    inc = np.asarray(increment, dtype=float)
    if inc.ndim != 1:
        raise ValueError("increment must be a vector")
    if not np.isfinite(inc).all():
        raise ValueError("increment must be finite")
    return TruncatedTensor(*segment_levels(inc))


def dilate(eps: float, a: TruncatedTensor) -> TruncatedTensor:
    """The graded dilation (ε a¹, ε² a², ε³ a³)."""
    if not eps > 0:
        raise ValueError(f"dilation factor must be positive, got {eps}")
    return TruncatedTensor(*scale_levels(eps, a.levels))


def sym2(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + np.swapaxes(x, -1, -2))


def antisym2(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x - np.swapaxes(x, -1, -2))


def sym3(x: np.ndarray) -> np.ndarray:
    n = x.ndim
    i, j, k = n - 3, n - 2, n - 1
    perms = [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)]
    lead = tuple(range(n - 3))
    return sum(np.transpose(x, lead + p) for p in perms) / 6.0


def shuffle_defect(levels) -> float:
    """Largest entrywise violation of the geometric (shuffle) relations.

    Checks sym(l2) = l1⊗l1/2 and, when present, sym(l3) = l1⊗l1⊗l1/6.
    """
    l1 = levels[0]
    defect = 0.0
    if len(levels) > 1:
        target = l1[..., :, None] * l1[..., None, :] / 2.0
        defect = max(defect, float(np.max(np.abs(sym2(levels[1]) - target), initial=0.0)))
    if len(levels) > 2:
        target = l1[..., :, None, None] * l1[..., None, :, None] * l1[..., None, None, :] / 6.0
        defect = max(defect, float(np.max(np.abs(sym3(levels[2]) - target), initial=0.0)))
    return defect
