"""LIBSVM-format parsing, deterministic client partitioning, synthetic data.

One example per line: a label token ("+1"/"1" map to +1, "-1"/"0" to -1)
followed by index:value pairs with strictly increasing 1-based indices.
Blank lines are skipped and anything after '#' on a line is a comment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .core import SeededRng
from .problems import Problem, Shard

_PARTITION_STREAM = 101
_SYNTHETIC_STREAM = 102


class LibsvmParseError(ValueError):
    """Parse failure carrying the offending 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Example:
    """A labeled sparse feature row."""

    label: int  # +1 or -1
    features: tuple[tuple[int, float], ...]  # (1-based index, value), strictly increasing

    def __post_init__(self) -> None:
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        prev = 0
        for idx, val in self.features:
            if idx <= prev:
                raise ValueError(f"feature indices must be strictly increasing, got {idx} after {prev}")
            if not np.isfinite(val):
                raise ValueError(f"feature value at index {idx} is not finite")
            prev = idx


_POSITIVE_LABELS = {"+1", "1"}
_NEGATIVE_LABELS = {"-1", "0"}


def parse_libsvm(text, expected_dim: Optional[int] = None) -> tuple[list[Example], int]:
    """Parse LIBSVM text into examples and the inferred dimension.

    The inferred dimension is the maximum feature index seen, overridden by
    ``expected_dim`` when that is larger. Accepts ``str`` or UTF-8 ``bytes``.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    examples: list[Example] = []
    max_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head in _POSITIVE_LABELS:
            label = 1
        elif head in _NEGATIVE_LABELS:
            label = -1
        else:
            raise LibsvmParseError(lineno, f"invalid label token {head!r}")
        feats: list[tuple[int, float]] = []
        prev = 0
        for tok in tokens[1:]:
            idx_str, _, val_str = tok.partition(":")
            if not _:
                raise LibsvmParseError(lineno, f"expected index:value, got {tok!r}")
            try:
                idx = int(idx_str)
            except ValueError:
                raise LibsvmParseError(lineno, f"non-numeric feature index {idx_str!r}") from None
            try:
                val = float(val_str)
            except ValueError:
                raise LibsvmParseError(lineno, f"non-numeric feature value {val_str!r}") from None
            if idx < 1:
                raise LibsvmParseError(lineno, f"feature index must be >= 1, got {idx}")
            if idx <= prev:
                raise LibsvmParseError(lineno, f"feature indices must be strictly increasing at {idx}")
            if not np.isfinite(val):
                raise LibsvmParseError(lineno, f"non-finite feature value {val_str!r}")
            feats.append((idx, val))
            prev = idx
        max_index = max(max_index, prev)
        examples.append(Example(label, tuple(feats)))
    dim = max_index
    if expected_dim is not None and expected_dim > dim:
        dim = expected_dim
    return examples, dim


def format_example(e: Example) -> str:
    """Serialize an example; parsing the result reproduces it exactly."""
    head = "+1" if e.label == 1 else "-1"
    return " ".join([head] + [f"{idx}:{val!r}" for idx, val in e.features])


@dataclass(frozen=True)
class Partition:
    """Disjoint, exhaustive split of example indices into n shards."""

    shards: tuple[tuple[int, ...], ...]
    seed: int


def partition(examples: Sequence, n: int, seed: int) -> Partition:
    """Shuffle deterministically, then cut into n near-equal contiguous blocks.

    The first (N mod n) shards receive one extra example.
    """
    count = len(examples)
    if n < 1:
        raise ValueError(f"need at least one shard, got n={n}")
    if n > count:
        raise ValueError(f"cannot split {count} examples into {n} shards")
    order = SeededRng(seed, _PARTITION_STREAM).generator().permutation(count)
    base, extra = divmod(count, n)
    shards = []
    start = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        shards.append(tuple(int(j) for j in order[start : start + size]))
        start += size
    return Partition(tuple(shards), seed)


def to_dense(examples: Sequence[Example], dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Materialize examples as a dense (N, dim) matrix and a label vector."""
    features = np.zeros((len(examples), dim), dtype=np.float64)
    labels = np.empty(len(examples), dtype=np.float64)
    for row, e in enumerate(examples):
        labels[row] = e.label
        for idx, val in e.features:
            if idx > dim:
                raise ValueError(f"feature index {idx} exceeds dimension {dim}")
            features[row, idx - 1] = val
    return features, labels


def max_abs_scale(features: np.ndarray) -> np.ndarray:
    """Scale each feature column by its max absolute value (zero columns kept)."""
    scale = np.max(np.abs(features), axis=0)
    scale[scale == 0.0] = 1.0
    return features / scale


def build_problem(
    examples: Sequence[Example],
    n_clients: int,
    lam: float,
    seed: int,
    dim: Optional[int] = None,
    scale_features: bool = False,
) -> Problem:
    """Partition examples across clients and assemble the logistic objective."""
    if dim is None:
        dim = max((e.features[-1][0] for e in examples if e.features), default=0)
    if dim < 1:
        raise ValueError("cannot infer a positive dimension from featureless data")
    features, labels = to_dense(examples, dim)
    if scale_features:
        features = max_abs_scale(features)
    part = partition(examples, n_clients, seed)
    shards = tuple(Shard(features[list(idx)], labels[list(idx)]) for idx in part.shards)
    return Problem.logistic(shards, lam)


@dataclass(frozen=True)
class SyntheticSpec:
    """Deterministic generator parameters for a synthetic classification set.

    ``cond`` spreads per-feature scales geometrically over [1/cond, 1],
    ill-conditioning the logistic curvature the way real tabular data does.
    """

    n_examples: int
    dim: int
    seed: int
    scale: float = 1.0
    label_flip: float = 0.0
    cond: float = 1.0

    def key(self) -> str:
        return (
            f"synthetic:n={self.n_examples},d={self.dim},seed={self.seed},"
            f"scale={self.scale!r},flip={self.label_flip!r},cond={self.cond!r}"
        )


def make_synthetic(spec: SyntheticSpec) -> list[Example]:
    """Gaussian features with Bernoulli labels from a random linear model.

    Labels are drawn from the model's own link probability, so classes
    overlap and the logistic minimizer stays finite.
    """
    if spec.cond < 1.0:
        raise ValueError(f"cond must be >= 1, got {spec.cond}")
    g = SeededRng(spec.seed, _SYNTHETIC_STREAM).generator()
    a = g.standard_normal((spec.n_examples, spec.dim)) * spec.scale
    if spec.cond > 1.0 and spec.dim > 1:
        exponents = np.arange(spec.dim) / (spec.dim - 1)
        a *= spec.cond ** (-exponents)
    w = g.standard_normal(spec.dim) / np.sqrt(spec.dim)
    prob = expit(a @ w)
    y = np.where(g.random(spec.n_examples) < prob, 1, -1)
    if spec.label_flip > 0:
        flips = g.random(spec.n_examples) < spec.label_flip
        y = np.where(flips, -y, y)
    examples = []
    for row in range(spec.n_examples):
        feats = tuple((j + 1, float(a[row, j])) for j in range(spec.dim))
        examples.append(Example(int(y[row]), feats))
    return examples
