"""Objective oracles: regularized logistic loss over client shards, diagonal quadratics.

The global objective is the mean of per-client objectives. Each logistic
client owns a shard of (features, label) pairs and contributes the mean
log-loss over its shard plus the bounded nonconvex penalty
lam * sum_j x_j^2 / (1 + x_j^2). Quadratic problems replicate one diagonal
quadratic across all clients, which pins exact smoothness and curvature
constants for rate tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .core import as_vector, mean_ascending

LOGISTIC = "logistic_nonconvex"
QUADRATIC = "quadratic"


@dataclass(frozen=True)
class Shard:
    """One client's slice of the dataset, materialized densely."""

    features: np.ndarray  # (examples, dim)
    labels: np.ndarray  # (examples,), entries in {-1, +1}

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=np.float64)
        l = np.asarray(self.labels, dtype=np.float64)
        if f.ndim != 2 or l.ndim != 1 or f.shape[0] != l.shape[0]:
            raise ValueError(f"inconsistent shard shapes {f.shape} / {l.shape}")
        if f.shape[0] == 0:
            raise ValueError("shard must contain at least one example")
        if not np.all(np.isfinite(f)):
            raise ValueError("shard features contain non-finite values")
        if not np.all(np.isin(l, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", l)

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Problem:
    """Finite-sum objective f = (1/n) sum_i f_i with per-client gradient oracles."""

    kind: str
    dim: int
    lam: float
    n_clients: int
    shards: tuple[Shard, ...] = ()
    diagonal: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise ValueError("need at least one client")
        if self.kind == LOGISTIC:
            if len(self.shards) != self.n_clients:
                raise ValueError("logistic problem needs one shard per client")
            for s in self.shards:
                if s.features.shape[1] != self.dim:
                    raise ValueError("all shards must share the problem dimension")
            if self.lam < 0:
                raise ValueError("regularization weight must be >= 0")
        elif self.kind == QUADRATIC:
            diag = as_vector(self.diagonal)
            if diag.shape[0] != self.dim:
                raise ValueError("diagonal length must equal the problem dimension")
            if np.any(diag < 0):
                raise ValueError("diagonal entries must be >= 0")
            object.__setattr__(self, "diagonal", diag)
        else:
            raise ValueError(f"unknown problem kind {self.kind!r}")

    @staticmethod
    def logistic(shards, lam: float) -> "Problem":
        shards = tuple(shards)
        if not shards:
            raise ValueError("need at least one shard")
        return Problem(LOGISTIC, shards[0].features.shape[1], lam, len(shards), shards)

    @staticmethod
    def quadratic(diagonal, n_clients: int = 1) -> "Problem":
        diag = as_vector(diagonal)
        return Problem(QUADRATIC, diag.shape[0], 0.0, n_clients, (), diag)


@dataclass(frozen=True)
class SmoothnessConstants:
    """Upper bounds on objective smoothness, plus the quadratic curvature floor.

    l_minus bounds the smoothness of the averaged objective; l_plus bounds
    the root-mean-square client smoothness, and l_minus <= l_plus always.
    """

    l_minus: float
    l_plus: float
    mu: Optional[float] = None

    def __post_init__(self) -> None:
        if not (0 < self.l_minus <= self.l_plus):
            raise ValueError(f"need 0 < l_minus <= l_plus, got {self.l_minus}, {self.l_plus}")
        if self.mu is not None and self.mu <= 0:
            raise ValueError(f"mu must be positive when present, got {self.mu}")


def _regularizer(lam: float, x: np.ndarray) -> float:
    sq = x * x
    return lam * float(np.sum(sq / (1.0 + sq)))


def _regularizer_gradient(lam: float, x: np.ndarray) -> np.ndarray:
    denom = 1.0 + x * x
    return (2.0 * lam) * x / (denom * denom)


def client_loss(p: Problem, i: int, x) -> float:
    """Value of client i's objective at x."""
    x = as_vector(x)
    if x.shape[0] != p.dim:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {p.dim}")
    if not 0 <= i < p.n_clients:
        raise ValueError(f"client index {i} out of range [0, {p.n_clients})")
    if p.kind == QUADRATIC:
        return 0.5 * float(np.sum(p.diagonal * x * x))
    shard = p.shards[i]
    z = shard.labels * (shard.features @ x)
    # softplus(-z) = log(1 + exp(-z)), overflow-safe
    return float(np.mean(np.logaddexp(0.0, -z))) + _regularizer(p.lam, x)


def client_gradient(p: Problem, i: int, x) -> np.ndarray:
    """Exact analytic gradient of client i's objective at x."""
    x = as_vector(x)
    if x.shape[0] != p.dim:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {p.dim}")
    if not 0 <= i < p.n_clients:
        raise ValueError(f"client index {i} out of range [0, {p.n_clients})")
    if p.kind == QUADRATIC:
        return p.diagonal * x
    shard = p.shards[i]
    z = shard.labels * (shard.features @ x)
    weights = -shard.labels * expit(-z)
    return shard.features.T @ weights / shard.size + _regularizer_gradient(p.lam, x)


def loss(p: Problem, x) -> float:
    """Global objective value: mean of client objectives."""
    if p.kind == QUADRATIC:
        return client_loss(p, 0, x)
    return sum(client_loss(p, i, x) for i in range(p.n_clients)) / p.n_clients


def full_gradient(p: Problem, x) -> np.ndarray:
    """Gradient of the global objective, summed in ascending client order."""
    if p.kind == QUADRATIC:
        return client_gradient(p, 0, x)
    grads = [client_gradient(p, i, x) for i in range(p.n_clients)]
    return mean_ascending(grads, p.dim)


def smoothness(p: Problem) -> SmoothnessConstants:
    """Conservative closed-form smoothness bounds (exact for quadratics).

    Logistic clients: L_i = mean |a|^2 / 4 + 2 * lam (the penalty's curvature
    is at most 2 per unit weight). The averaged-objective bound is the mean
    of the L_i; the mean-square bound is their quadratic mean.
    """
    if p.kind == QUADRATIC:
        top = float(np.max(p.diagonal))
        if top <= 0:
            raise ValueError("quadratic with all-zero diagonal has no curvature scale")
        positive = p.diagonal[p.diagonal > 0]
        return SmoothnessConstants(top, top, float(np.min(positive)))
    per_client = np.array(
        [float(np.mean(np.sum(s.features**2, axis=1))) / 4.0 + 2.0 * p.lam for s in p.shards]
    )
    if np.any(per_client <= 0):
        raise ValueError("degenerate shard with zero smoothness bound")
    l_plus = float(np.sqrt(np.mean(per_client**2)))
    l_minus = min(float(np.mean(per_client)), l_plus)
    return SmoothnessConstants(l_minus, l_plus)


def check_gradient(p: Problem, x, step: float = 1e-5) -> float:
    """Max relative error of the analytic gradient against central differences.

    The denominator is max(1, |analytic coordinate|) so coordinates near zero
    are compared absolutely.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    x = as_vector(x)
    analytic = full_gradient(p, x)
    worst = 0.0
    for j in range(p.dim):
        e = np.zeros(p.dim)
        e[j] = step
        numeric = (loss(p, x + e) - loss(p, x - e)) / (2.0 * step)
        worst = max(worst, abs(numeric - analytic[j]) / max(1.0, abs(analytic[j])))
    return worst
