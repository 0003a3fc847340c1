"""Shared numeric primitives: vectors, compressor constants, seeded RNG streams.

All vector arithmetic is 64-bit floating point. Communication costs are
accounted separately (see :mod:`adacgd.engine`) and never change computed
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


def as_vector(values) -> np.ndarray:
    """Coerce ``values`` to a finite 1-D float64 array."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    return v


def check_same_dim(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")


def sqnorm(u: np.ndarray) -> float:
    return float(u @ u)


def squared_distance(u, v) -> float:
    """Sum of squared coordinate differences between two equal-length vectors.

    Symmetric, nonnegative, and zero iff the inputs are equal.
    """
    u, v = as_vector(u), as_vector(v)
    check_same_dim(u, v)
    d = u - v
    return float(d @ d)


@dataclass(frozen=True)
class ThreePCConstants:
    """Certified (a, b) pair of a three-point compression inequality.

    The pair certifies  err(h, y, x) <= (1 - a) * |h - y|^2 + b * |x - y|^2
    with 0 < a <= 1 and b >= 0, where err is the (expected) squared
    reconstruction error of the compressor output against x.
    """

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (0.0 < self.a <= 1.0):
            raise ValueError(f"contraction constant a must lie in (0, 1], got {self.a}")
        if not (math.isfinite(self.b) and self.b >= 0.0):
            raise ValueError(f"drift constant b must be finite and >= 0, got {self.b}")


def combine_constants(parts: Iterable[ThreePCConstants]) -> ThreePCConstants:
    """Constants certified for a rule that dispatches among ``parts``.

    The combined pair is (min over a, max over b): whichever component fires,
    its inequality is implied by the combined one.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("combine_constants needs at least one component")
    return ThreePCConstants(min(p.a for p in parts), max(p.b for p in parts))


def _mix64(state: int, salt: int) -> int:
    # SplitMix64 finalizer; stable across platforms, pure integer arithmetic.
    z = (state + (salt + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SeededRng:
    """Counter-based deterministic stream keyed by (seed, stream_id).

    Identical (seed, stream_id) pairs yield identical draw sequences across
    runs and platforms. Instances are immutable; derive disjoint child
    streams instead of sharing one stream between concurrent tasks.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.seed <= _MASK64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not (0 <= self.stream_id <= _MASK64):
            raise ValueError("stream_id must be an unsigned 64-bit integer")

    def derive(self, *salts: int) -> "SeededRng":
        """Child stream obtained by mixing ``salts`` into the stream id."""
        sid = self.stream_id
        for s in salts:
            sid = _mix64(sid, int(s) & _MASK64)
        return SeededRng(self.seed, sid)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(key=(self.seed << 64) | self.stream_id))


def mean_ascending(vectors: Sequence[np.ndarray], dim: int) -> np.ndarray:
    """Mean of ``vectors`` accumulated in ascending index order.

    Fixed summation order keeps floating-point results reproducible no matter
    how callers schedule the per-worker computations.
    """
    acc = np.zeros(dim, dtype=np.float64)
    for v in vectors:
        acc += v
    acc /= len(vectors)
    return acc
