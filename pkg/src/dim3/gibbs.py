"""Collapsed Gibbs sampling for the time-variant (MTV) and time-invariant (MTI) models.

One sweep resamples every pair's (sender, receiver) labels jointly in the
compiled kernel, compacts empty communities, then draws the franchise table
counts, the top-level concentration, the community weights and finally the
total concentration and sticky share.

MTI bookkeeping: every sender slot ``(i, j)`` and receiver slot ``(i, j)``
is a label chain over time owned by node ``i`` (sender) or ``j``
(receiver).  Node ``a`` has one restaurant per previous label: index 0 for
the first time step, ``k + 1`` after label ``k``.  ``TR[a, p, k]`` counts the
labels ``k`` drawn in restaurant ``p`` and ``TOT[a, p]`` its total.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._rand import dirichlet
from .hyper import HyperPriors, sample_concentration, sample_gamma, sample_ratio
from .model import (
    CountCache,
    GlobalWeights,
    LabelState,
    RelationTensor,
    loglik_from_counts,
    random_labels,
    rebuild_counts,
)
from .stirling import StirlingTable

__all__ = [
    "MODELS",
    "HYPER_NAMES",
    "SamplerState",
    "TableCounts",
    "init_state",
    "crf_predictive",
    "pair_log_weights",
    "sample_pair_labels",
    "sample_tables",
    "split_tables",
    "resample_beta",
    "update_hyperparameters",
    "gibbs_sweep_mtv",
    "gibbs_sweep_mti",
    "finite_sweep",
    "finite_state",
    "sample_labels",
    "transition_counts",
    "sweep",
]

MODELS = ("mtv", "mti")
HYPER_NAMES = ("gamma", "alpha", "kappa")
MIN_CAPACITY = 8


class SamplerState:
    """Labels, incremental counts and global weights of one chain.

    Count arrays carry spare capacity beyond ``K`` so that new communities
    can be opened inside the kernel; :meth:`grow` enlarges them.

    ``finite=True`` gives the fixed-K baseline: the weights stay at
    ``1 / K`` with no remainder and no new community is ever proposed.
    """

    def __init__(self, data: RelationTensor, labels: LabelState, weights: GlobalWeights,
                 model: str = "mtv", finite: bool = False, capacity: int | None = None):
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {model!r}")
        self.data = data
        self.model = model
        self.finite = finite
        self.E = np.ascontiguousarray(data.edges, dtype=np.int8)
        self.pairs = data.pairs()
        self.time_pairs = [np.ascontiguousarray(self.pairs[self.pairs[:, 0] == t])
                           for t in range(data.T)]
        self.S = np.ascontiguousarray(labels.sender, dtype=np.int32).copy()
        self.R = np.ascontiguousarray(labels.receiver, dtype=np.int32).copy()
        if self.S.shape != self.E.shape:
            raise ValueError(f"label shape {self.S.shape} does not match data {self.E.shape}")
        K = int(labels.K)
        if len(weights.beta) != K:
            raise ValueError(f"{len(weights.beta)} weights for K={K} communities")
        self.gamma = float(weights.gamma)
        self.alpha = float(weights.alpha)
        self.kappa = float(weights.kappa)
        self.lambda1 = float(weights.lambda1)
        self.lambda2 = float(weights.lambda2)
        cap = max(capacity or 0, K + 2, 2 * K, MIN_CAPACITY)
        self._K = np.array([K], dtype=np.int64)
        self._beta = np.zeros(cap)
        self._beta[:K] = weights.beta
        self._beta_u = np.array([weights.remainder])
        self.stirling = StirlingTable(2 * max(self.n - 1, 1) * max(self.T, 1))
        self._alloc(cap)
        self.rebuild()

    # -- shape -------------------------------------------------------------

    @property
    def T(self) -> int:
        return self.E.shape[0]

    @property
    def n(self) -> int:
        return self.E.shape[1]

    @property
    def K(self) -> int:
        return int(self._K[0])

    @property
    def capacity(self) -> int:
        return self._beta.shape[0]

    @property
    def c(self) -> float:
        """Sticky mass per previous-time customer, ``kappa / (2n)``."""
        return self.kappa / (2 * self.n)

    @property
    def beta(self) -> np.ndarray:
        return self._beta[: self.K]

    @property
    def beta_u(self) -> float:
        return float(self._beta_u[0])

    @property
    def weights(self) -> GlobalWeights:
        return GlobalWeights(self.beta.copy(), self.beta_u, self.gamma, self.alpha,
                             self.kappa, self.lambda1, self.lambda2)

    @property
    def labels(self) -> LabelState:
        return LabelState(self.S.copy(), self.R.copy(), self.K)

    def set_beta(self, beta, remainder) -> None:
        beta = np.asarray(beta, dtype=np.float64)
        if beta.size != self.K:
            raise ValueError("beta length must equal K")
        self._beta[: self.K] = beta
        self._beta_u[0] = remainder

    # -- counts ------------------------------------------------------------

    def _alloc(self, cap: int) -> None:
        T, n = self.T, self.n
        self.L1 = np.zeros((cap, cap), dtype=np.int64)
        self.L0 = np.zeros((cap, cap), dtype=np.int64)
        if self.model == "mtv":
            self.N = np.zeros((T, n, cap), dtype=np.int64)
        else:
            self.TR = np.zeros((n, cap + 1, cap), dtype=np.int64)
            self.TOT = np.zeros((n, cap + 1), dtype=np.int64)

    def grow(self, cap: int) -> None:
        """Enlarge every count array to ``cap`` communities, keeping contents."""
        old = self.capacity
        if cap <= old:
            return
        beta = np.zeros(cap)
        beta[:old] = self._beta
        self._beta = beta
        L1, L0 = self.L1, self.L0
        if self.model == "mtv":
            N = self.N
        else:
            TR, TOT = self.TR, self.TOT
        self._alloc(cap)
        self.L1[:old, :old] = L1
        self.L0[:old, :old] = L0
        if self.model == "mtv":
            self.N[:, :, :old] = N
        else:
            self.TR[:, : old + 1, :old] = TR
            self.TOT[:, : old + 1] = TOT

    def _fresh_counts(self):
        K = self.K
        cap = self.capacity
        counts = rebuild_counts(LabelState(self.S, self.R, K), self.data, max(K, 1))
        L1 = np.zeros((cap, cap), dtype=np.int64)
        L0 = np.zeros((cap, cap), dtype=np.int64)
        kk = counts.K
        L1[:kk, :kk] = counts.link1_total
        L0[:kk, :kk] = counts.link0_total
        out = {"L1": L1, "L0": L0}
        if self.model == "mtv":
            N = np.zeros((self.T, self.n, cap), dtype=np.int64)
            N[:, :, :kk] = counts.participation
            out["N"] = N
        else:
            out["TR"], out["TOT"] = transition_counts(self.S, self.R, cap)
        return out

    def rebuild(self) -> None:
        """Recompute all incremental counts from the labels."""
        for name, arr in self._fresh_counts().items():
            setattr(self, name, arr)

    def check(self) -> None:
        """Raise if the incremental counts drifted from a fresh recount."""
        for name, arr in self._fresh_counts().items():
            if not np.array_equal(getattr(self, name), arr):
                raise AssertionError(f"incremental count {name} differs from a fresh recount")

    def counts(self) -> CountCache:
        """Per-time counts over the ``K`` live communities."""
        return rebuild_counts(LabelState(self.S, self.R, self.K), self.data, max(self.K, 1))

    def participation(self) -> np.ndarray:
        """``N[t, i, k]`` over the live communities."""
        if self.model == "mtv":
            return self.N[:, :, : self.K].copy()
        return self.counts().participation[:, :, : self.K]

    def loglik(self) -> float:
        K = self.K
        return loglik_from_counts(self.L1[:K, :K], self.L0[:K, :K], self.lambda1, self.lambda2)

    # -- maintenance -------------------------------------------------------

    def compact(self) -> np.ndarray:
        """Drop empty communities and renumber; returns the kept old indices.

        Weights of dropped communities return to the remainder.
        """
        K = self.K
        mask = np.broadcast_to(~np.eye(self.n, dtype=bool), self.S.shape)
        used = np.zeros(K, dtype=bool)
        used[self.S[mask]] = True
        used[self.R[mask]] = True
        if used.all():
            return np.arange(K)
        keep = np.flatnonzero(used)
        remap = np.full(K, -1, dtype=np.int32)
        remap[keep] = np.arange(keep.size, dtype=np.int32)
        self.S[mask] = remap[self.S[mask]]
        self.R[mask] = remap[self.R[mask]]
        if not self.finite:
            self._beta_u[0] += self._beta[:K][~used].sum()
        beta = self._beta[:K][keep].copy()
        self._beta[:] = 0.0
        self._beta[: keep.size] = beta
        self._K[0] = keep.size
        self.rebuild()
        return keep

    def copy(self) -> "SamplerState":
        new = SamplerState.__new__(SamplerState)
        new.__dict__.update(self.__dict__)
        for name in ("S", "R", "_K", "_beta", "_beta_u", "L1", "L0", "N", "TR", "TOT"):
            if name in self.__dict__:
                setattr(new, name, self.__dict__[name].copy())
        return new


def transition_counts(S: np.ndarray, R: np.ndarray, cap: int):
    """``TR[a, p, k]`` and ``TOT[a, p]`` for the MTI label chains."""
    T, n, _ = S.shape
    TR = np.zeros((n, cap + 1, cap), dtype=np.int64)
    if T:
        i, j = np.nonzero(~np.eye(n, dtype=bool))
        for owner, lab in ((i, S[:, i, j]), (j, R[:, i, j])):
            prev = np.vstack([np.full((1, owner.size), -1), lab[:-1]]) + 1
            own = np.broadcast_to(owner, lab.shape)
            np.add.at(TR, (own.ravel(), prev.ravel(), lab.ravel()), 1)
    return TR, TR.sum(axis=2)


def init_state(data: RelationTensor, model: str = "mtv", rng=None, K_init: int = 1,
               weights: GlobalWeights | None = None, finite: bool = False) -> SamplerState:
    """Random labels over ``K_init`` communities with equal weights."""
    rng = np.random.default_rng(rng)
    labels = random_labels(data, K_init, rng)
    w = weights.copy() if weights is not None else GlobalWeights.uniform(K_init)
    if finite:
        w.beta, w.remainder = np.full(K_init, 1.0 / K_init), 0.0
    elif len(w.beta) != K_init:
        w.beta = np.full(K_init, (1.0 - w.remainder) / K_init)
    state = SamplerState(data, labels, w, model=model, finite=finite)
    if not finite:
        state.compact()
    return state


# ---------------------------------------------------------------------------
# single-pair conditionals (reference path; sweeps use the kernels)


def crf_predictive(state: SamplerState, node: int, k: int, t: int) -> float:
    """Unnormalized MTV weight of label ``k`` for a customer of restaurant ``(node, t)``.

    Counts are taken as stored, so the caller removes the label being
    resampled first.  ``k == K`` is the new-community weight.
    """
    K = state.K
    if k == K:
        return state.alpha * state.beta_u
    w = state.N[t, node, k] + state.alpha * state.beta[k]
    if t > 0:
        w += state.c * state.N[t - 1, node, k]
    return float(w)


def _remove_pair(state, t, i, j, sign):
    k, l = state.S[t, i, j], state.R[t, i, j]
    (state.L1 if state.E[t, i, j] else state.L0)[k, l] += sign
    if state.model == "mtv":
        state.N[t, i, k] += sign
        state.N[t, j, l] += sign
        return
    for a, lab in ((i, state.S[:, i, j]), (j, state.R[:, i, j])):
        p = 0 if t == 0 else lab[t - 1] + 1
        state.TR[a, p, lab[t]] += sign
        state.TOT[a, p] += sign
        if t + 1 < state.T:
            state.TR[a, lab[t] + 1, lab[t + 1]] += sign
            state.TOT[a, lab[t] + 1] += sign


def _log_forward(b, c, M):
    from scipy.special import gammaln
    b = np.maximum(b, 1e-300)
    out = gammaln(b + c + M) - gammaln(b + c) - gammaln(b + M) + gammaln(b)
    return np.where(M > 0, out, 0.0)


def _slot_log_weights_mtv(state, t, a):
    K = state.K
    ab = state.alpha * state.beta
    base = ab + (state.c * state.N[t - 1, a, :K] if t > 0 else 0.0)
    lw = np.log(state.N[t, a, :K] + base)
    if t + 1 < state.T:
        lw = lw + _log_forward(ab + state.c * state.N[t, a, :K], state.c, state.N[t + 1, a, :K])
    return lw


def _slot_log_weights_mti(state, a, lab, t):
    K = state.K
    ab = state.alpha * state.beta
    p = 0 if t == 0 else lab[t - 1] + 1
    ks = np.arange(K)
    first = state.TR[a, p, :K] + ab + state.kappa * (ks + 1 == p)
    lw = np.log(first)
    if t + 1 < state.T:
        q = lab[t + 1]
        own = ks + 1 == p
        num = state.TR[a, ks + 1, q] + ab[q] + state.kappa * (ks == q) + (own & (ks == q))
        den = state.TOT[a, ks + 1] + state.alpha + state.kappa + own
        lw = lw + np.log(num / den)
    return lw


def pair_log_weights(state: SamplerState, t: int, i: int, j: int) -> np.ndarray:
    """Log weights of the joint ``(sender, receiver)`` conditional of one pair.

    Returns a ``(K + 1) x (K + 1)`` table whose last row/column is the new
    community (``K x K`` for finite states).  Computed with numpy,
    independently of the kernels, with the pair temporarily removed.
    """
    _remove_pair(state, t, i, j, -1)
    try:
        K = state.K
        if state.model == "mtv":
            ls = _slot_log_weights_mtv(state, t, i)
            lr = _slot_log_weights_mtv(state, t, j)
        else:
            ls = _slot_log_weights_mti(state, i, state.S[:, i, j], t)
            lr = _slot_log_weights_mti(state, j, state.R[:, i, j], t)
        prior1 = state.lambda1 / (state.lambda1 + state.lambda2)
        n1, n0 = state.L1[:K, :K], state.L0[:K, :K]
        p1 = (n1 + state.lambda1) / (n1 + n0 + state.lambda1 + state.lambda2)
        if not state.finite:
            p1 = np.pad(p1, ((0, 1), (0, 1)), constant_values=prior1)
            new = np.log(state.alpha * state.beta_u)
            ls_new, lr_new = new, new
            if state.model == "mti" and t + 1 < state.T:
                # a new label starts a fresh restaurant: the next label is a base draw
                conc = state.alpha + state.kappa
                ls_new += np.log(state.alpha * state.beta[state.S[t + 1, i, j]] / conc)
                lr_new += np.log(state.alpha * state.beta[state.R[t + 1, i, j]] / conc)
            ls = np.append(ls, ls_new)
            lr = np.append(lr, lr_new)
        le = np.log(p1 if state.E[t, i, j] else 1.0 - p1)
        return ls[:, None] + lr[None, :] + le
    finally:
        _remove_pair(state, t, i, j, +1)


def _run_labels(state: SamplerState, order: np.ndarray, U: np.ndarray, kern) -> None:
    allow_new = int(not state.finite)
    start = 0
    P = order.shape[0]
    while start < P:
        if state.model == "mtv":
            stop = kern.mtv_gibbs_labels(
                state.E, state.S, state.R, state.N, state.L1, state.L0,
                state._beta, state._beta_u, state._K, order, U,
                state.alpha, state.c, state.lambda1, state.lambda2, state.gamma,
                allow_new, start)
        else:
            stop = kern.mti_gibbs_labels(
                state.E, state.S, state.R, state.TR, state.TOT, state.L1, state.L0,
                state._beta, state._beta_u, state._K, order, U,
                state.alpha, state.kappa, state.lambda1, state.lambda2, state.gamma,
                allow_new, start)
        if stop < P:
            state.grow(2 * state.capacity)
        start = stop


def sample_pair_labels(state: SamplerState, t: int, i: int, j: int, rng,
                       kernels=None) -> tuple[int, int]:
    """Resample one pair's labels in place; returns the new ``(sender, receiver)``."""
    if i == j:
        raise ValueError("self pairs carry no labels")
    order = np.array([[t, i, j]], dtype=np.int64)
    _run_labels(state, order, rng.random((1, 4)), kernels or _backend.kernels)
    return int(state.S[t, i, j]), int(state.R[t, i, j])


def sample_labels(state: SamplerState, rng, random_order: bool = False, kernels=None) -> None:
    """One pass over all pairs in lexicographic (or shuffled) order."""
    order = state.pairs
    if order.shape[0] == 0:
        return
    if random_order:
        order = np.ascontiguousarray(order[rng.permutation(order.shape[0])])
    U = rng.random((order.shape[0], 4))
    _run_labels(state, order, U, kernels or _backend.kernels)


# ---------------------------------------------------------------------------
# franchise tables


@dataclass
class TableCounts:
    """Tables per (restaurant, dish) and the part seated by the global weights.

    MTV restaurants are ``(t, i)`` (arrays ``T x n x K``); MTI restaurants
    are ``(a, p)`` (arrays ``n x (K + 1) x K``).
    """

    tables: np.ndarray
    unsticky: np.ndarray | None = None

    @property
    def dish_totals(self) -> np.ndarray:
        """``sum of m_hat`` per community."""
        u = self.unsticky if self.unsticky is not None else self.tables
        return u.reshape(-1, u.shape[-1]).sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.tables.sum())


def _restaurants(state: SamplerState):
    """Customer counts, global part ``alpha beta`` and sticky part per (restaurant, dish)."""
    K = state.K
    ab = state.alpha * state.beta
    if state.model == "mtv":
        N = state.N[:, :, :K]
        sticky = np.zeros(N.shape)
        sticky[1:] = state.c * state.N[:-1, :, :K]
        return N, np.broadcast_to(ab, N.shape), sticky
    N = state.TR[:, : K + 1, :K]
    sticky = np.zeros(N.shape)
    k = np.arange(K)
    sticky[:, k + 1, k] = state.kappa
    return N, np.broadcast_to(ab, N.shape), sticky


def draw_table_counts(customers: np.ndarray, mass: np.ndarray, stirling: StirlingTable,
                      rng) -> np.ndarray:
    """``m ~ S(N, m) mass^m`` for every entry, by inverse CDF over ``m = 1..N``."""
    customers = np.asarray(customers, dtype=np.int64)
    out = np.zeros(customers.shape, dtype=np.int64)
    nz = customers > 0
    if not nz.any():
        return out
    Nv = customers[nz]
    av = np.maximum(np.broadcast_to(mass, customers.shape)[nz], 1e-300)
    logS = stirling.rows(Nv)
    lw = logS + np.arange(logS.shape[1]) * np.log(av)[:, None]
    lw -= lw.max(axis=1, keepdims=True)
    cum = np.cumsum(np.exp(lw), axis=1)
    u = rng.random(Nv.size) * cum[:, -1]
    out[nz] = np.minimum((cum <= u[:, None]).sum(axis=1), Nv)
    return out


def sample_tables(state: SamplerState, rng) -> TableCounts:
    N, ab, sticky = _restaurants(state)
    return TableCounts(draw_table_counts(N, ab + sticky, state.stirling, rng))


def split_tables(tables: TableCounts, state: SamplerState, rng) -> TableCounts:
    """Binomial share of each dish's tables seated by ``alpha beta`` rather than the sticky mass."""
    _, ab, sticky = _restaurants(state)
    total = ab + sticky
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(total > 0, ab / total, 0.0)
    unsticky = rng.binomial(tables.tables, np.clip(p, 0.0, 1.0))
    return TableCounts(tables.tables, unsticky)


def resample_beta(tables: TableCounts, gamma: float, rng) -> tuple[np.ndarray, float]:
    """``(beta, beta_u) ~ Dir(m_hat totals, gamma)``."""
    counts = tables.dish_totals.astype(np.float64)
    if (counts <= 0).any():
        raise ValueError("every community needs at least one global table; compact first")
    w = dirichlet(np.append(counts, gamma), rng)
    return w[:-1], float(w[-1])


# ---------------------------------------------------------------------------
# hyperparameters


def _shrink(state: SamplerState, shape) -> np.ndarray:
    """Fraction of the sticky share removed from each restaurant's total mass."""
    d = np.zeros(shape)
    if state.model == "mtv":
        d[0] = 1.0
        d[1:] = 1.0 / state.n
    else:
        d[:, 0] = 1.0
    return d


def update_hyperparameters(state: SamplerState, tables: TableCounts, prior: HyperPriors,
                           rng, freeze=()) -> None:
    """Top-level concentration and weights, then total concentration and sticky share.

    ``freeze`` names hyperparameters to hold fixed (``gamma``, ``alpha``,
    ``kappa``); freezing either of ``alpha`` / ``kappa`` holds both.
    """
    freeze = set(freeze)
    unknown = freeze - set(HYPER_NAMES)
    if unknown:
        raise ValueError(f"unknown hyperparameter(s) to freeze: {sorted(unknown)}")
    mhat = tables.dish_totals
    if "gamma" not in freeze:
        state.gamma = sample_gamma(state.K, int(mhat.sum()), prior, rng)
    beta, rest = resample_beta(tables, state.gamma, rng)
    state.set_beta(beta, rest)
    if "alpha" in freeze or "kappa" in freeze:
        return
    m = tables.tables.sum(axis=-1)
    if state.model == "mtv":
        customers = np.full(m.shape, 2 * (state.n - 1))
    else:
        customers = state.TOT[:, : state.K + 1]
    shrink = _shrink(state, m.shape)
    conc, tilt = sample_concentration(customers, m, prior, rng, current=state.alpha + state.kappa,
                                      shrink=shrink, ratio=state.kappa / (state.alpha + state.kappa))
    sticky = int(tables.tables.sum() - tables.unsticky.sum())
    ratio = sample_ratio(sticky, int(tables.unsticky.sum()), prior, rng, tilt=tilt)
    state.alpha = conc * (1.0 - ratio)
    state.kappa = conc * ratio


# ---------------------------------------------------------------------------
# sweeps


def sweep(state: SamplerState, rng, prior: HyperPriors | None = None, freeze=(),
          random_order: bool = False, kernels=None) -> SamplerState:
    """One full Gibbs sweep of either model."""
    sample_labels(state, rng, random_order=random_order, kernels=kernels)
    if state.finite:
        return state
    state.compact()
    if state.K == 0:
        return state
    tables = split_tables(sample_tables(state, rng), state, rng)
    state.tables = tables
    update_hyperparameters(state, tables, prior or HyperPriors(), rng, freeze)
    return state


def gibbs_sweep_mtv(state: SamplerState, rng, prior: HyperPriors | None = None, freeze=(),
                    random_order: bool = False, kernels=None) -> SamplerState:
    if state.model != "mtv":
        raise ValueError("state holds an MTI chain")
    return sweep(state, rng, prior, freeze, random_order, kernels)


def gibbs_sweep_mti(state: SamplerState, rng, prior: HyperPriors | None = None, freeze=(),
                    random_order: bool = False, kernels=None) -> SamplerState:
    if state.model != "mti":
        raise ValueError("state holds an MTV chain")
    return sweep(state, rng, prior, freeze, random_order, kernels)


def finite_sweep(state: SamplerState, K_fixed: int, rng, random_order: bool = False,
                 kernels=None) -> SamplerState:
    """Fixed-K sweep: symmetric weights ``1 / K_fixed``, no new communities, hyperparameters held."""
    if K_fixed < 1:
        raise ValueError("K_fixed must be at least 1")
    if not state.finite or state.K != K_fixed:
        raise ValueError(f"state is not a finite chain with K={K_fixed}")
    return sweep(state, rng, random_order=random_order, kernels=kernels)


def finite_state(data: RelationTensor, K_fixed: int, model: str = "mtv", rng=None,
                 alpha: float = 1.0, kappa: float = 1.0,
                 lambda1: float = 1.0, lambda2: float = 1.0) -> SamplerState:
    """Random-label start for the fixed-K baselines."""
    w = GlobalWeights(np.full(K_fixed, 1.0 / K_fixed), 0.0, 1.0, alpha, kappa, lambda1, lambda2)
    return init_state(data, model, rng, K_fixed, w, finite=True)
