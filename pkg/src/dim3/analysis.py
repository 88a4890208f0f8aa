"""Chain traces, convergence diagnostics and ground-truth recovery metrics."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment

__all__ = [
    "TRACE_COLUMNS",
    "ChainTrace",
    "density_D",
    "state_density_D",
    "autocorrelation",
    "iat",
    "psrf",
    "geweke_z",
    "align_communities",
    "l2_membership",
    "l2_compat",
    "loglik_summary",
    "MembershipAccumulator",
    "BRUTE_FORCE_MAX",
]

TRACE_COLUMNS = ("iteration", "chain", "K", "D", "loglik", "gamma", "alpha", "kappa")
BRUTE_FORCE_MAX = 8


@dataclass
class ChainTrace:
    chain: int = 0
    iteration: list = field(default_factory=list)
    K: list = field(default_factory=list)
    D: list = field(default_factory=list)
    loglik: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    kappa: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.iteration)

    def append(self, iteration: int, K: int, D: float, loglik: float,
               gamma: float, alpha: float, kappa: float) -> None:
        if self.iteration and iteration <= self.iteration[-1]:
            raise ValueError("iteration indices must increase")
        self.iteration.append(int(iteration))
        self.K.append(int(K))
        self.D.append(float(D))
        self.loglik.append(float(loglik))
        self.gamma.append(float(gamma))
        self.alpha.append(float(alpha))
        self.kappa.append(float(kappa))

    def series(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=np.float64)

    def retained(self, name: str, burn_in: float = 0.5, thin: int = 1) -> np.ndarray:
        x = self.series(name)
        return x[int(len(x) * burn_in):][::thin]

    def rows(self):
        for k in range(len(self)):
            yield (self.iteration[k], self.chain, self.K[k], repr(self.D[k]),
                   repr(self.loglik[k]), repr(self.gamma[k]), repr(self.alpha[k]),
                   repr(self.kappa[k]))

    def write_csv(self, path, header: bool = True, mode: str = "w") -> None:
        with open(path, mode, newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header:
                w.writerow(TRACE_COLUMNS)
            w.writerows(self.rows())

    @classmethod
    def read_csv(cls, path) -> "ChainTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            head = next(reader, None)
            if head is None or tuple(head) != TRACE_COLUMNS:
                raise ValueError(f"{path}: not a trace file (header {head!r})")
            out = None
            for line, row in enumerate(reader, 2):
                if len(row) != len(TRACE_COLUMNS):
                    raise ValueError(f"{path}:{line}: expected {len(TRACE_COLUMNS)} fields")
                it, ch, K, D, ll, g, a, k = row
                if out is None:
                    out = cls(chain=int(ch))
                out.append(int(it), int(K), float(D), float(ll), float(g), float(a), float(k))
        return out if out is not None else cls()


# ---------------------------------------------------------------------------
# estimated density


def density_D(participation: np.ndarray, link1: np.ndarray, link0: np.ndarray,
              edges: np.ndarray, lambda1: float = 1.0, lambda2: float = 1.0) -> float:
    """``-2 sum log(sum_kl N_ik N_jl / (4 n^2 T) p(e | k, l))`` over observed pairs.

    ``participation`` is ``(T, n, K)``; ``link1``/``link0`` are the
    time-aggregated ``K x K`` link counts.
    """
    T, n, _ = participation.shape
    if T == 0 or n < 2:
        return 0.0
    p1 = (link1 + lambda1) / (link1 + link0 + lambda1 + lambda2)
    Nf = participation.astype(np.float64)
    a1 = np.einsum("tik,kl,tjl->tij", Nf, p1, Nf)
    a0 = np.einsum("tik,kl,tjl->tij", Nf, 1.0 - p1, Nf)
    inner = np.where(edges.astype(bool), a1, a0) / (4.0 * n * n * T)
    mask = np.broadcast_to(~np.eye(n, dtype=bool), inner.shape)
    return float(-2.0 * np.log(inner[mask]).sum())


def state_density_D(state) -> float:
    K = state.K
    return density_D(state.participation(), state.L1[:K, :K], state.L0[:K, :K],
                     state.E, state.lambda1, state.lambda2)


# ---------------------------------------------------------------------------
# single-chain diagnostics


def autocorrelation(x) -> np.ndarray:
    """Empirical autocorrelation ``rho_0 .. rho_{M-1}`` (biased 1/M normalization)."""
    x = np.asarray(x, dtype=np.float64)
    M = x.size
    y = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * M)))
    f = np.fft.rfft(y, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:M] / M
    if acov[0] <= 0:
        raise ValueError("constant series: autocorrelation undefined")
    return acov / acov[0]


def iat(series) -> float:
    """Integrated autocorrelation time ``1/2 + sum_{l < C} rho_l``.

    ``C`` is the first lag whose autocorrelation falls below ``2 / sqrt(M)``
    in absolute value.
    """
    x = np.asarray(series, dtype=np.float64)
    M = x.size
    if M < 10:
        raise ValueError(f"series too short for an autocorrelation time (M={M} < 10)")
    if np.ptp(x) == 0:
        raise ValueError("constant series: autocorrelation undefined")
    rho = autocorrelation(x)
    small = np.flatnonzero(np.abs(rho[1:]) < 2.0 / np.sqrt(M))
    C = int(small[0]) + 1 if small.size else M
    return float(0.5 + rho[1:C].sum())


def psrf(chains, confidence: float = 0.95) -> tuple[float, float]:
    """Potential scale reduction factor and its upper confidence limit.

    Between/within variance ratio with the degrees-of-freedom correction and
    F-based upper limit of the usual multi-chain diagnostic.  Pass the
    retained halves of the chains.
    """
    x = np.asarray(chains, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two chains of equal length")
    m, n = x.shape
    if n < 2:
        raise ValueError("chains need at least two samples")
    s2 = x.var(axis=1, ddof=1)
    W = s2.mean()
    if W <= 0:
        raise ValueError("zero within-chain variance")
    xbar = x.mean(axis=1)
    B = n * xbar.var(ddof=1)
    muhat = xbar.mean()
    var_w = s2.var(ddof=1) / m
    var_b = 2.0 * B * B / (m - 1)
    cov_wb = (n / m) * (np.cov(s2, xbar ** 2)[0, 1] - 2.0 * muhat * np.cov(s2, xbar)[0, 1])
    V = (n - 1) / n * W + (1 + 1 / m) * B / n
    var_V = ((n - 1) ** 2 * var_w + (1 + 1 / m) ** 2 * var_b
             + 2 * (n - 1) * (1 + 1 / m) * cov_wb) / n ** 2
    df_adj = 1.0 if var_V <= 0 else ((2 * V * V / var_V) + 3) / ((2 * V * V / var_V) + 1)
    fixed = (n - 1) / n
    random = (1 + 1 / m) * (1 / n) * (B / W)
    q = (1 + confidence) / 2
    if var_w > 0:
        fq = stats.f.ppf(q, m - 1, 2 * W * W / var_w)
    else:
        fq = stats.chi2.ppf(q, m - 1) / (m - 1)
    est = np.sqrt(df_adj * (fixed + random))
    upper = np.sqrt(df_adj * (fixed + fq * random))
    return float(est), float(upper)


def _batch_var_of_mean(x: np.ndarray, batches: int) -> float:
    size = x.size // batches
    if size < 1:
        raise ValueError("segment shorter than the number of batches")
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return means.var(ddof=1) / batches


def geweke_z(series, first_frac: float = 0.1, last_frac: float = 0.5, batches: int = 20) -> float:
    """Difference of early and late means in standard-error units.

    Standard errors come from non-overlapping batch means.
    """
    x = np.asarray(series, dtype=np.float64)
    M = x.size
    if M < 100:
        raise ValueError(f"series too short for the Geweke diagnostic (M={M} < 100)")
    if not (0 < first_frac and 0 < last_frac and first_frac + last_frac <= 1):
        raise ValueError("segment fractions must be positive and sum to at most 1")
    a = x[: int(first_frac * M)]
    b = x[M - int(last_frac * M):]
    va = _batch_var_of_mean(a, batches)
    vb = _batch_var_of_mean(b, batches)
    if va + vb <= 0:
        raise ValueError("degenerate variance in both segments")
    return float((a.mean() - b.mean()) / np.sqrt(va + vb))


# ---------------------------------------------------------------------------
# alignment and recovery


def _pad_cols(x: np.ndarray, k: int) -> np.ndarray:
    return np.pad(x, [(0, 0)] * (x.ndim - 1) + [(0, k - x.shape[-1])])


def _pad_square(x: np.ndarray, k: int) -> np.ndarray:
    return np.pad(x, ((0, k - x.shape[0]), (0, k - x.shape[1])))


def _membership_cost(est, truth):
    # mean over rows of the l2 row error, for each permutation in a batch
    return lambda perms: np.linalg.norm(est[:, perms] - truth[:, None, :], axis=2).mean(axis=0)


def _compat_cost(est, truth):
    def cost(perms):
        sub = est[perms[:, :, None], perms[:, None, :]]
        return np.linalg.norm(sub - truth, axis=2).mean(axis=1)
    return cost


def align_communities(estimate, truth, kind: str = "membership",
                      exhaustive: bool | None = None) -> np.ndarray:
    """Column order of ``estimate`` that best matches ``truth``.

    Both sides are zero-padded to a common size ``m``.  Returns ``perm`` of
    length ``m`` such that ``estimate[..., perm]`` (membership) or
    ``estimate[perm][:, perm]`` (compat) is aligned with the padded truth.
    Exhaustive search for ``m <= 8`` (or when ``exhaustive`` is set),
    otherwise a linear assignment on squared column (membership) or
    diagonal-plus-row-mean (compat) distances.
    """
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if kind == "membership":
        est = est.reshape(-1, est.shape[-1])
        tru = tru.reshape(-1, tru.shape[-1])
        if est.shape[0] != tru.shape[0]:
            raise ValueError("estimate and truth have different numbers of rows")
        m = max(est.shape[1], tru.shape[1])
        est, tru = _pad_cols(est, m), _pad_cols(tru, m)
        cost = _membership_cost(est, tru)
        sq = ((est[:, :, None] - tru[:, None, :]) ** 2).sum(axis=0)  # [est col, truth col]
    elif kind == "compat":
        m = max(est.shape[0], tru.shape[0])
        est, tru = _pad_square(est, m), _pad_square(tru, m)
        cost = _compat_cost(est, tru)
        sq = ((est[:, None, :].mean(axis=2) - tru[None, :, :].mean(axis=2)) ** 2
              + (np.diag(est)[:, None] - np.diag(tru)[None, :]) ** 2)
    else:
        raise ValueError(f"kind must be 'membership' or 'compat', got {kind!r}")
    if exhaustive is None:
        exhaustive = m <= BRUTE_FORCE_MAX
    if exhaustive:
        perms = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
        best = np.inf
        best_perm = perms[0]
        for lo in range(0, len(perms), 4096):
            chunk = perms[lo: lo + 4096]
            c = cost(chunk)
            k = int(np.argmin(c))
            if c[k] < best - 1e-15:
                best, best_perm = c[k], chunk[k]
        return best_perm.copy()
    rows, cols = linear_sum_assignment(sq)
    perm = np.empty(m, dtype=np.int64)
    perm[cols] = rows
    return perm


def l2_membership(estimate, truth, aligned: bool = False) -> float:
    """Mean over rows of the l2 distance between membership rows after alignment.

    ``estimate`` may carry leading axes (e.g. time); every row is compared
    with the truth row of the same node.
    """
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.ndim == 3:
        tru = np.broadcast_to(tru, est.shape[:2] + tru.shape[-1:])
    est2 = est.reshape(-1, est.shape[-1])
    tru2 = tru.reshape(-1, tru.shape[-1])
    m = max(est2.shape[1], tru2.shape[1])
    est2, tru2 = _pad_cols(est2, m), _pad_cols(tru2, m)
    if not aligned:
        est2 = est2[:, align_communities(est2, tru2)]
    return float(np.linalg.norm(est2 - tru2, axis=1).mean())


def l2_compat(estimate, truth, aligned: bool = False) -> float:
    """Mean over rows of the l2 distance between compatibility rows after alignment."""
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    m = max(est.shape[0], tru.shape[0])
    est, tru = _pad_square(est, m), _pad_square(tru, m)
    if not aligned:
        p = align_communities(est, tru, "compat")
        est = est[np.ix_(p, p)]
    return float(np.linalg.norm(est - tru, axis=1).mean())


def loglik_summary(values, burn_in: float = 0.5, thin: int = 1):
    """Mean of the retained samples and its 95% interval ``mean -/+ 1.96 SE``."""
    x = np.asarray(values, dtype=np.float64)
    x = x[int(len(x) * burn_in):][::thin]
    if x.size < 2:
        raise ValueError("need at least two retained samples")
    mean = float(x.mean())
    se = float(x.std(ddof=1) / np.sqrt(x.size))
    return mean, (mean - 1.96 * se, mean + 1.96 * se)


class MembershipAccumulator:
    """Posterior-mean membership and compatibility under label switching.

    Each retained sample is aligned to the running mean before it is added.
    """

    def __init__(self):
        self.count = 0
        self._member = None
        self._compat = None

    def _grow(self, k):
        if self._member.shape[-1] < k:
            self._member = _pad_cols(self._member, k)
            self._compat = _pad_square(self._compat, k)

    def add(self, membership: np.ndarray, compat: np.ndarray) -> None:
        membership = np.asarray(membership, dtype=np.float64)
        compat = np.asarray(compat, dtype=np.float64)
        k = membership.shape[-1]
        if self._member is None:
            self._member = membership.copy()
            self._compat = compat.copy()
            self.count = 1
            return
        self._grow(k)
        m = self._member.shape[-1]
        est = _pad_cols(membership, m)
        perm = align_communities(est, self._member / self.count, exhaustive=False)
        self._member += est[..., perm]
        self._compat += _pad_square(compat, m)[np.ix_(perm, perm)]
        self.count += 1

    @property
    def membership(self) -> np.ndarray:
        return self._member / self.count

    @property
    def compat(self) -> np.ndarray:
        return self._compat / self.count

    @classmethod
    def sample_from_state(cls, state):
        """Per-time membership rows ``N / 2(n-1)`` and posterior-mean compatibility."""
        K = state.K
        member = state.participation() / (2.0 * (state.n - 1))
        n1, n0 = state.L1[:K, :K], state.L0[:K, :K]
        compat = (n1 + state.lambda1) / (n1 + n0 + state.lambda1 + state.lambda2)
        return member, compat
