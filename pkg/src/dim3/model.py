"""Model state, sufficient statistics and the collapsed Beta-Bernoulli likelihood.

Conventions used throughout the package:

* edges and labels are stored as ``(T, n, n)`` arrays indexed ``[t, i, j]``
  for the ordered pair ``i -> j`` at time ``t`` (0-based);
* self pairs ``(i, i)`` are not part of the model: edges hold 0 and labels
  hold -1 on the diagonal;
* communities are 0-based integers ``0 .. K-1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln

__all__ = [
    "RelationTensor",
    "LabelState",
    "CountCache",
    "GlobalWeights",
    "CompatibilityMatrix",
    "offdiag_mask",
    "rebuild_counts",
    "edge_predictive",
    "joint_loglik",
    "random_labels",
]


def offdiag_mask(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


@dataclass
class RelationTensor:
    """Observed directed binary network, one ``n x n`` slice per time step."""

    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges)
        if e.ndim != 3 or e.shape[1] != e.shape[2]:
            raise ValueError(f"edges must have shape (T, n, n), got {e.shape}")
        if e.size and not np.isin(e, (0, 1)).all():
            raise ValueError("edges must be binary")
        e = e.astype(np.int8, copy=True)
        if e.shape[1]:
            e[:, np.arange(e.shape[1]), np.arange(e.shape[1])] = 0
        self.edges = e

    @property
    def T(self) -> int:
        return self.edges.shape[0]

    @property
    def n(self) -> int:
        return self.edges.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.n * (self.n - 1) * self.T

    def pairs(self) -> np.ndarray:
        """All ``(t, i, j)`` with ``i != j`` in lexicographic order."""
        t, i, j = np.nonzero(np.broadcast_to(offdiag_mask(self.n), self.edges.shape))
        return np.column_stack([t, i, j]).astype(np.int64)

    def density(self) -> float:
        return float(self.edges.sum()) / max(self.n_pairs, 1)

    def __eq__(self, other):
        return isinstance(other, RelationTensor) and np.array_equal(self.edges, other.edges)


@dataclass
class LabelState:
    """Sender and receiver community indicators for every ordered pair."""

    sender: np.ndarray
    receiver: np.ndarray
    K: int

    def __post_init__(self):
        self.sender = np.asarray(self.sender, dtype=np.int32)
        self.receiver = np.asarray(self.receiver, dtype=np.int32)
        if self.sender.shape != self.receiver.shape:
            raise ValueError("sender and receiver shapes differ")

    def copy(self) -> "LabelState":
        return LabelState(self.sender.copy(), self.receiver.copy(), self.K)

    def used(self) -> np.ndarray:
        """Sorted array of communities that hold at least one label."""
        n = self.sender.shape[1]
        m = np.broadcast_to(offdiag_mask(n), self.sender.shape)
        return np.unique(np.concatenate([self.sender[m], self.receiver[m]]))

    def n_used(self) -> int:
        return int(self.used().size)


@dataclass
class CountCache:
    """Participation counts ``N[t, i, k]`` and link counts ``link{0,1}[t, k, l]``."""

    participation: np.ndarray
    link1: np.ndarray
    link0: np.ndarray

    @property
    def K(self) -> int:
        return self.participation.shape[2]

    @property
    def link1_total(self) -> np.ndarray:
        return self.link1.sum(axis=0)

    @property
    def link0_total(self) -> np.ndarray:
        return self.link0.sum(axis=0)

    def __eq__(self, other):
        return (
            isinstance(other, CountCache)
            and np.array_equal(self.participation, other.participation)
            and np.array_equal(self.link1, other.link1)
            and np.array_equal(self.link0, other.link0)
        )


@dataclass
class GlobalWeights:
    """Top-level community weights and hyperparameters."""

    beta: np.ndarray
    remainder: float
    gamma: float = 1.0
    alpha: float = 1.0
    kappa: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.remainder = float(self.remainder)

    @classmethod
    def uniform(cls, K: int, remainder: bool = True, **hyper) -> "GlobalWeights":
        """Equal weights over ``K`` communities (plus the remainder when asked)."""
        parts = K + 1 if remainder else K
        return cls(np.full(K, 1.0 / parts), 1.0 / parts if remainder else 0.0, **hyper)

    def check(self, tol: float = 1e-10) -> None:
        total = self.beta.sum() + self.remainder
        if abs(total - 1.0) > tol:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        if (self.beta < 0).any() or self.remainder < 0:
            raise ValueError("weights must be non-negative")
        if self.gamma <= 0 or self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ValueError("gamma, lambda1 and lambda2 must be positive")
        if self.alpha < 0 or self.kappa < 0:
            raise ValueError("alpha and kappa must be non-negative")

    @property
    def conc(self) -> float:
        """Total concentration ``alpha + kappa``."""
        return self.alpha + self.kappa

    @property
    def ratio(self) -> float:
        """Sticky share ``kappa / (alpha + kappa)``."""
        return self.kappa / self.conc if self.conc > 0 else 0.0

    def copy(self) -> "GlobalWeights":
        return GlobalWeights(
            self.beta.copy(), self.remainder, self.gamma, self.alpha, self.kappa,
            self.lambda1, self.lambda2,
        )


@dataclass
class CompatibilityMatrix:
    entries: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError("compatibility matrix must be square")
        if ((self.entries < 0) | (self.entries > 1)).any():
            raise ValueError("compatibility entries must lie in [0, 1]")

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def posterior_mean(cls, counts: CountCache, lambda1: float, lambda2: float):
        n1, n0 = counts.link1_total, counts.link0_total
        return cls((n1 + lambda1) / (n1 + n0 + lambda1 + lambda2))


def random_labels(data: RelationTensor, K: int, rng: np.random.Generator) -> LabelState:
    """Labels drawn uniformly from ``0 .. K-1``; -1 on the diagonal."""
    shape = data.edges.shape
    s = rng.integers(0, K, size=shape, dtype=np.int32)
    r = rng.integers(0, K, size=shape, dtype=np.int32)
    d = np.arange(data.n)
    s[:, d, d] = -1
    r[:, d, d] = -1
    return LabelState(s, r, K)


def rebuild_counts(labels: LabelState, data: RelationTensor, K: int | None = None) -> CountCache:
    """Recompute every count from scratch.

    ``K`` may exceed ``labels.K`` to leave spare (zero) capacity.
    """
    if labels.sender.shape != data.edges.shape:
        raise ValueError(
            f"label shape {labels.sender.shape} does not match data {data.edges.shape}"
        )
    K = labels.K if K is None else K
    T, n = data.T, data.n
    t, i, j = data.pairs().T
    s = labels.sender[t, i, j].astype(np.int64)
    r = labels.receiver[t, i, j].astype(np.int64)
    if s.size and (min(s.min(), r.min()) < 0 or max(s.max(), r.max()) >= K):
        raise ValueError("label index outside 0..K-1")
    e = data.edges[t, i, j].astype(bool)

    part = np.bincount((t * n + i) * K + s, minlength=T * n * K)
    part += np.bincount((t * n + j) * K + r, minlength=T * n * K)
    cell = (t * K + s) * K + r
    link1 = np.bincount(cell[e], minlength=T * K * K)
    link0 = np.bincount(cell[~e], minlength=T * K * K)
    return CountCache(
        part.reshape(T, n, K).astype(np.int64),
        link1.reshape(T, K, K).astype(np.int64),
        link0.reshape(T, K, K).astype(np.int64),
    )


def edge_predictive(k: int, l: int, e: int, counts: CountCache,
                    lambda1: float = 1.0, lambda2: float = 1.0) -> float:
    """Collapsed Beta-Bernoulli predictive of one edge given its labels.

    ``counts`` must already exclude the queried pair.  Link counts are
    pooled over time because the compatibility matrix is time-invariant.
    Communities outside the cache (new ones) fall back to the prior mean.
    """
    if k < counts.K and l < counts.K:
        n1 = counts.link1[:, k, l].sum()
        n0 = counts.link0[:, k, l].sum()
    else:
        n1 = n0 = 0
    p1 = (n1 + lambda1) / (n1 + n0 + lambda1 + lambda2)
    return float(p1 if e else 1.0 - p1)


def joint_loglik(labels: LabelState, data: RelationTensor, weights: GlobalWeights) -> float:
    """``log P(E | Z)`` with the compatibility matrix integrated out."""
    if data.T == 0 or data.n < 2:
        return 0.0
    counts = rebuild_counts(labels, data, max(labels.K, 1))
    return loglik_from_counts(counts.link1_total, counts.link0_total,
                              weights.lambda1, weights.lambda2)


def loglik_from_counts(n1: np.ndarray, n0: np.ndarray, lambda1: float, lambda2: float) -> float:
    used = (n1 + n0) > 0
    return float(np.sum(betaln(n1[used] + lambda1, n0[used] + lambda2) - betaln(lambda1, lambda2)))
