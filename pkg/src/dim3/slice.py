"""Slice-efficient sampling of the MTV labels.

Time steps are visited in order.  At step ``t`` every node's membership
vector is instantiated from its Dirichlet full conditional (existing
communities plus the unseen remainder), each pair draws two uniform slices
under the sticks of its current labels, the top-level sticks are extended
until the unseen mass of every node lies below that node's smallest slice,
and labels are redrawn from the finite candidate sets.  The next-step
coupling and the edge likelihood stay collapsed, so the label weights are
the forward factor times the edge predictive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._rand import log_gamma_variates
from .gibbs import SamplerState, split_tables, sample_tables, update_hyperparameters
from .hyper import HyperPriors

__all__ = [
    "StickState",
    "sample_sticks",
    "sample_slices",
    "extend_sticks",
    "sample_pair_labels_slice",
    "slice_step",
    "slice_sweep_mtv",
]

MAX_ATOMS = 100_000


@dataclass
class StickState:
    """Membership sticks of every node at one time step plus the pairs' slices."""

    t: int
    pi: np.ndarray          # (n, K) sticks of instantiated communities
    rest: np.ndarray        # (n,) unseen mass
    pairs: np.ndarray | None = None  # (P, 3) pairs at time t
    us: np.ndarray | None = None
    ur: np.ndarray | None = None

    def row_min_slice(self) -> np.ndarray:
        """Smallest slice touching each node (sender or receiver side)."""
        n = self.pi.shape[0]
        out = np.full(n, np.inf)
        np.minimum.at(out, self.pairs[:, 1], self.us)
        np.minimum.at(out, self.pairs[:, 2], self.ur)
        return out


def _normalized(logs: np.ndarray) -> np.ndarray:
    m = logs.max(axis=-1, keepdims=True)
    w = np.exp(logs - m)
    return w / w.sum(axis=-1, keepdims=True)


def sample_sticks(state: SamplerState, t: int, rng) -> StickState:
    """Membership vectors at time ``t`` given all labels.

    ``pi_i ~ Dir(alpha beta + c N^{t-1}_i + N^t_i, alpha beta_u)``; the
    remainder coordinate is absent for finite states.
    """
    if state.model != "mtv":
        raise ValueError("slice sampling is implemented for MTV only")
    K = state.K
    params = state.alpha * state.beta + state.N[t, :, :K]
    if t > 0:
        params = params + state.c * state.N[t - 1, :, :K]
    if not state.finite:
        params = np.column_stack([params, np.full(state.n, state.alpha * state.beta_u)])
    w = _normalized(log_gamma_variates(params, rng))
    if state.finite:
        return StickState(t, w, np.zeros(state.n))
    return StickState(t, w[:, :K].copy(), w[:, K].copy())


def sample_slices(state: SamplerState, sticks: StickState, rng) -> StickState:
    """``u ~ U(0, pi of the current label)`` for both slots of every pair at ``sticks.t``."""
    t = sticks.t
    pairs = state.time_pairs[t]
    _, i, j = pairs.T
    u = rng.random((pairs.shape[0], 2))
    sticks.pairs = pairs
    sticks.us = u[:, 0] * sticks.pi[i, state.S[t, i, j]]
    sticks.ur = u[:, 1] * sticks.pi[j, state.R[t, i, j]]
    return sticks


def extend_sticks(state: SamplerState, sticks: StickState, rng) -> int:
    """Open empty communities until every node's unseen mass is below its smallest slice.

    Each new community takes a ``Beta(1, gamma)`` share of the top-level
    remainder and a ``Beta(alpha beta_new, alpha beta_u)`` share of every
    node's unseen mass.  Returns the number of communities opened.
    """
    if state.finite:
        return 0
    floor = sticks.row_min_slice()
    opened = 0
    cols = []
    while (sticks.rest >= floor).any():
        if state.K >= MAX_ATOMS:
            raise RuntimeError("stick extension did not terminate")
        if state.K + 1 > state.capacity:
            state.grow(2 * state.capacity)
        b = 1.0 - rng.random() ** (1.0 / state.gamma)
        k = state.K
        new = b * state.beta_u
        state._beta[k] = new
        state._beta_u[0] -= new
        state._K[0] = k + 1
        lg = log_gamma_variates(
            np.broadcast_to([state.alpha * new, state.alpha * state.beta_u], (state.n, 2)), rng)
        v = _normalized(lg)[:, 0]
        cols.append(sticks.rest * v)
        sticks.rest = sticks.rest * (1.0 - v)
        opened += 1
    if cols:
        sticks.pi = np.column_stack([sticks.pi] + cols)
    return opened


def sample_pair_labels_slice(state: SamplerState, sticks: StickState, rng,
                             kernels=None) -> None:
    """Redraw the labels of every pair at ``sticks.t`` from its candidate grid."""
    kern = kernels or _backend.kernels
    K = state.K
    pi = np.ascontiguousarray(sticks.pi[:, :K])
    kern.mtv_slice_labels(
        state.E, state.S, state.R, state.N, state.L1, state.L0,
        np.ascontiguousarray(state._beta[:K]), pi, sticks.us, sticks.ur, sticks.pairs,
        rng.random(sticks.pairs.shape[0]),
        state.alpha, state.c, state.lambda1, state.lambda2)


def slice_step(state: SamplerState, t: int, rng, kernels=None) -> StickState:
    """Sticks, slices, stick extension and labels for one time step."""
    sticks = sample_sticks(state, t, rng)
    sample_slices(state, sticks, rng)
    extend_sticks(state, sticks, rng)
    if sticks.pairs.shape[0]:
        sample_pair_labels_slice(state, sticks, rng, kernels)
    return sticks


def slice_sweep_mtv(state: SamplerState, rng, prior: HyperPriors | None = None, freeze=(),
                    kernels=None) -> SamplerState:
    """All time steps, then compaction, tables, weights and hyperparameters."""
    for t in range(state.T):
        slice_step(state, t, rng, kernels)
    if state.finite:
        return state
    state.compact()
    if state.K == 0:
        return state
    tables = split_tables(sample_tables(state, rng), state, rng)
    state.tables = tables
    update_hyperparameters(state, tables, prior or HyperPriors(), rng, freeze)
    return state
