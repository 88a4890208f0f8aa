"""Brute-force posterior over every label configuration of a tiny network.

Only the fixed-K (truncated) models are enumerable: weights are ``1 / K``
and ``alpha``, ``kappa``, ``lambda1``, ``lambda2`` are held fixed.  Both
membership distributions and the compatibility matrix are integrated out,
so the unnormalized log posterior of a configuration is a sum of
Dirichlet-multinomial and Beta-Bernoulli terms.

Configurations are indexed by the label digits (base ``K``) of the slots
``(pair 0 sender, pair 0 receiver, pair 1 sender, ...)`` with pairs in
lexicographic ``(t, i, j)`` order; the first slot is the most significant
digit.  ``probs.reshape((K,) * slots)`` therefore has one axis per slot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln, logsumexp

from .model import GlobalWeights, LabelState, RelationTensor

__all__ = ["MAX_CONFIGS", "EnumeratedPosterior", "enumerate_exact", "config_index"]

MAX_CONFIGS = 20_000_000
CHUNK = 1 << 18


@dataclass
class EnumeratedPosterior:
    probs: np.ndarray
    K: int
    pairs: np.ndarray
    model: str

    @property
    def slots(self) -> int:
        return 2 * self.pairs.shape[0]

    def table(self) -> np.ndarray:
        return self.probs.reshape((self.K,) * self.slots)

    def marginal(self, slots) -> np.ndarray:
        """Joint distribution of the given slot labels (axes in the order given)."""
        slots = list(slots)
        others = tuple(d for d in range(self.slots) if d not in slots)
        m = self.table().sum(axis=others)
        kept = sorted(slots)
        return np.moveaxis(m, [kept.index(s) for s in slots], range(len(slots)))

    def labels(self, index: int, shape) -> LabelState:
        """Label arrays of configuration ``index``."""
        digits = _digits(np.array([index]), self.slots, self.K)[0]
        s = np.full(shape, -1, dtype=np.int32)
        r = np.full(shape, -1, dtype=np.int32)
        t, i, j = self.pairs.T
        s[t, i, j] = digits[0::2]
        r[t, i, j] = digits[1::2]
        return LabelState(s, r, self.K)


def config_index(S: np.ndarray, R: np.ndarray, pairs: np.ndarray, K: int) -> np.ndarray:
    """Configuration index of one state (``S``, ``R`` of shape ``(T, n, n)``)
    or of a batch (shape ``(B, T, n, n)``)."""
    t, i, j = pairs.T
    digits = np.empty(S.shape[:-3] + (2 * len(t),), dtype=np.int64)
    digits[..., 0::2] = S[..., t, i, j]
    digits[..., 1::2] = R[..., t, i, j]
    weights = K ** np.arange(digits.shape[-1] - 1, -1, -1, dtype=np.int64)
    return digits @ weights


def _digits(idx: np.ndarray, D: int, K: int) -> np.ndarray:
    out = np.empty((idx.size, D), dtype=np.int64)
    rest = idx.copy()
    for d in range(D - 1, -1, -1):
        out[:, d] = rest % K
        rest //= K
    return out


def enumerate_exact(data: RelationTensor, K_max: int, weights: GlobalWeights,
                    model: str = "mtv") -> EnumeratedPosterior:
    """Exact ``P(labels | edges)`` of the fixed-K model, by enumeration.

    ``weights.beta`` is ignored in favour of ``1 / K_max``; ``weights.alpha``,
    ``kappa``, ``lambda1``, ``lambda2`` are used as given.
    """
    if model not in ("mtv", "mti"):
        raise ValueError(f"model must be 'mtv' or 'mti', got {model!r}")
    if K_max < 1:
        raise ValueError("K_max must be at least 1")
    pairs = data.pairs()
    D = 2 * pairs.shape[0]
    total = K_max ** D
    if total > MAX_CONFIGS:
        raise ValueError(f"{K_max}^{D} = {total} configurations exceeds the limit of {MAX_CONFIGS}")
    K, T, n = K_max, data.T, data.n
    ab = np.full(K, weights.alpha / K)
    c = weights.kappa / (2 * n)
    lam1, lam2 = weights.lambda1, weights.lambda2
    t_of, i_of, j_of = pairs.T
    e = data.edges[t_of, i_of, j_of].astype(bool)
    # slot owners: sender slot belongs to node i, receiver slot to node j
    owner = np.empty(D, dtype=np.int64)
    owner[0::2], owner[1::2] = i_of, j_of
    slot_t = np.repeat(t_of, 2)
    # slot of the same chain one step earlier (MTI), -1 at the first time
    prev_slot = np.full(D, -1)
    where = {(t, i, j): p for p, (t, i, j) in enumerate(pairs)}
    for p, (t, i, j) in enumerate(pairs):
        if t > 0:
            q = where[(t - 1, i, j)]
            prev_slot[2 * p], prev_slot[2 * p + 1] = 2 * q, 2 * q + 1

    # every term depends on small integer counts: tabulate the log-gamma parts
    M = 2 * (n - 1)  # customers per MTV restaurant
    top = D + 1
    cnt = np.arange(top)
    bb = betaln(cnt[:, None] + lam1, cnt[None, :] + lam2) - betaln(lam1, lam2)
    if model == "mtv":
        prev = np.arange(M + 1)[:, None]
        a_t = ab[0] + c * prev  # base mass of one community given its previous count
        grow = gammaln(a_t + cnt[None, :]) - gammaln(a_t)  # [previous, current]
        grow0 = gammaln(ab[0] + cnt) - gammaln(ab[0])
        A0, A1 = weights.alpha, weights.alpha + c * M
        norm = (gammaln(A0) - gammaln(A0 + M)) * n + (gammaln(A1) - gammaln(A1 + M)) * n * (T - 1)
    else:
        first = gammaln(ab[0] + cnt) - gammaln(ab[0])
        stick = gammaln(ab[0] + weights.kappa + cnt) - gammaln(ab[0] + weights.kappa)
        A0, A1 = weights.alpha, weights.alpha + weights.kappa
        tot0 = gammaln(A0) - gammaln(A0 + cnt)
        tot1 = gammaln(A1) - gammaln(A1 + cnt)
    slot_t_owner = slot_t * n + owner

    logp = np.empty(total)
    for lo in range(0, total, CHUNK):
        idx = np.arange(lo, min(lo + CHUNK, total), dtype=np.int64)
        z = _digits(idx, D, K)
        B = idx.size
        lp = np.zeros(B)
        if model == "mtv":
            N = np.zeros((B, T * n, K), dtype=np.int64)
            for d in range(D):
                N[:, slot_t_owner[d]] += z[:, d, None] == np.arange(K)
            N = N.reshape(B, T, n, K)
            lp += grow0[N[:, 0]].sum(axis=(1, 2))
            for t in range(1, T):
                lp += grow[N[:, t - 1], N[:, t]].sum(axis=(1, 2))
            lp += norm
        else:
            TR = np.zeros((B, n, (K + 1) * K), dtype=np.int64)
            codes = np.arange((K + 1) * K)
            for d in range(D):
                p = 0 if prev_slot[d] < 0 else z[:, prev_slot[d]] + 1
                TR[:, owner[d]] += (np.asarray(p * K + z[:, d])[..., None] == codes)
            TR = TR.reshape(B, n, K + 1, K)
            sticky = np.zeros((K + 1, K), dtype=bool)
            sticky[np.arange(1, K + 1), np.arange(K)] = True
            lp += np.where(sticky, stick[TR], first[TR]).sum(axis=(1, 2, 3))
            TOT = TR.sum(axis=3)
            lp += tot0[TOT[:, :, 0]].sum(axis=1) + tot1[TOT[:, :, 1:]].sum(axis=(1, 2))
        n1 = np.zeros((B, K * K), dtype=np.int64)
        n0 = np.zeros((B, K * K), dtype=np.int64)
        cells = np.arange(K * K)
        for q in range(pairs.shape[0]):
            (n1 if e[q] else n0)[:] += (z[:, 2 * q] * K + z[:, 2 * q + 1])[:, None] == cells
        lp += bb[n1, n0].sum(axis=1)
        logp[lo: lo + B] = lp
    logp -= logsumexp(logp)
    return EnumeratedPosterior(np.exp(logp), K, pairs, model)
