"""Synthetic dynamic networks and the plain-text dataset format.

Dataset file layout (``#`` starts a comment, blank lines are ignored)::

    dim3-dataset 1
    name <identifier>
    n <nodes>
    T <time steps>
    nodes <label> ... <label>          # optional, n labels
    times <label> ... <label>          # optional, T labels
    time <label>                       # then n rows of n entries
    - 0 1 ...                          # '-' on the diagonal, 0/1 elsewhere
    ...
    truth <K>                          # optional ground truth
    case <id>                          # optional, inside truth
    membership                         # n rows of K reals
    ...
    compat                             # K rows of K reals
    ...

Reals are written with ``repr`` so a save/load round trip is bit-exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rand import dirichlet, log_gamma_variates
from .hyper import HyperPriors
from .model import CompatibilityMatrix, GlobalWeights, LabelState, RelationTensor

__all__ = [
    "GroundTruth",
    "DatasetBundle",
    "DatasetFormatError",
    "GROUP_MEMBERSHIPS",
    "case_matrix",
    "fixed_truth",
    "generate_fixed",
    "generate_mtv",
    "generate_mti",
    "draw_hyperparameters",
    "sampson_like",
    "save_dataset",
    "load_dataset",
]

#: mixed-membership rows of the four node groups in the synthetic benchmark
GROUP_MEMBERSHIPS = np.array([
    [0.8, 0.2, 0.0],
    [0.0, 0.8, 0.2],
    [0.1, 0.05, 0.85],
    [0.4, 0.4, 0.2],
])

_CASES = {
    1: [[0.95, 0.05, 0.0], [0.05, 0.95, 0.05], [0.05, 0.0, 0.95]],
    2: [[0.95, 0.2, 0.0], [0.05, 0.95, 0.05], [0.2, 0.0, 0.95]],
    3: [[0.05, 0.95, 0.0], [0.05, 0.05, 0.95], [0.95, 0.0, 0.05]],
    4: [[0.05, 0.95, 0.0], [0.2, 0.05, 0.95], [0.95, 0.0, 0.2]],
}

STICK_TOL = 1e-12


class DatasetFormatError(ValueError):
    pass


@dataclass
class GroundTruth:
    membership: np.ndarray
    compat: CompatibilityMatrix
    case_id: int | None = None

    def __post_init__(self):
        self.membership = np.asarray(self.membership, dtype=np.float64)
        if not isinstance(self.compat, CompatibilityMatrix):
            self.compat = CompatibilityMatrix(self.compat)
        if self.membership.ndim != 2 or self.membership.shape[1] != self.compat.K:
            raise ValueError("membership must be n x K with K matching the compat matrix")
        if (self.membership < 0).any() or np.abs(self.membership.sum(axis=1) - 1).max(initial=0) > 1e-10:
            raise ValueError("membership rows must be probability vectors")

    @property
    def K(self) -> int:
        return self.compat.K


@dataclass
class DatasetBundle:
    data: RelationTensor
    truth: GroundTruth | None = None
    name: str = "dataset"
    meta: dict = field(default_factory=dict)
    latent: dict | None = None

    def __post_init__(self):
        if self.truth is not None and self.truth.membership.shape[0] != self.data.n:
            raise ValueError("ground truth and data disagree on the node count")


def case_matrix(case_id: int) -> CompatibilityMatrix:
    """Compatibility matrix of synthetic case 1..4."""
    if case_id not in _CASES:
        raise ValueError(f"case_id must be one of 1..4, got {case_id!r}")
    return CompatibilityMatrix(np.array(_CASES[case_id]))


def fixed_truth(case_id: int, n: int = 20) -> GroundTruth:
    """Nodes split into four equal groups sharing three communities."""
    groups = np.array_split(np.arange(n), 4)
    member = np.empty((n, 3))
    for g, idx in enumerate(groups):
        member[idx] = GROUP_MEMBERSHIPS[g]
    return GroundTruth(member, case_matrix(case_id), case_id)


def _categorical(p: np.ndarray, size, rng) -> np.ndarray:
    c = np.cumsum(p)
    return np.minimum(np.searchsorted(c, rng.random(size) * c[-1], side="right"), len(p) - 1)


def generate_fixed(truth: GroundTruth, n: int, T: int, seed) -> DatasetBundle:
    """Labels from the sender's / receiver's membership rows, edges from the compat matrix."""
    if truth.membership.shape[0] != n:
        raise ValueError(f"truth has {truth.membership.shape[0]} rows, expected n={n}")
    rng = np.random.default_rng(seed)
    M, W = truth.membership, truth.compat.entries
    s = np.full((T, n, n), -1, dtype=np.int32)
    r = np.full((T, n, n), -1, dtype=np.int32)
    E = np.zeros((T, n, n), dtype=np.int8)
    for t in range(T):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                s[t, i, j] = _categorical(M[i], None, rng)
                r[t, i, j] = _categorical(M[j], None, rng)
                E[t, i, j] = rng.random() < W[s[t, i, j], r[t, i, j]]
    name = f"case{truth.case_id}" if truth.case_id else "fixed"
    return DatasetBundle(
        RelationTensor(E), truth, name,
        latent={"labels": LabelState(s, r, truth.K)},
    )


def _gem(gamma: float, rng, tol: float = STICK_TOL) -> tuple[np.ndarray, float]:
    """Stick-breaking weights, extended until the leftover mass drops below ``tol``."""
    sticks = []
    rest = 1.0
    while rest >= tol:
        v = 1.0 - rng.random() ** (1.0 / gamma)
        sticks.append(rest * v)
        rest *= 1.0 - v
        if len(sticks) > 100_000:
            break
    return np.array(sticks), rest


def _relabel(s, r, n_atoms):
    """Map used atoms to 0..K-1 in order of first use; returns labels and the atom list."""
    n = s.shape[1]
    mask = np.broadcast_to(~np.eye(n, dtype=bool), s.shape)
    order = np.concatenate([s[mask], r[mask]])
    _, first = np.unique(order, return_index=True)
    atoms = order[np.sort(first)]
    remap = np.full(n_atoms, -1, dtype=np.int32)
    remap[atoms] = np.arange(atoms.size)
    s2 = np.where(mask, remap[np.where(mask, s, 0)], -1).astype(np.int32)
    r2 = np.where(mask, remap[np.where(mask, r, 0)], -1).astype(np.int32)
    return s2, r2, atoms


def _edges(s, r, K, lam1, lam2, rng):
    W = rng.beta(lam1, lam2, size=(K, K))
    n = s.shape[1]
    mask = ~np.eye(n, dtype=bool)
    p = np.where(mask, W[np.maximum(s, 0), np.maximum(r, 0)], 0.0)
    return (rng.random(s.shape) < p).astype(np.int8), W


def _finish(s, r, atoms_beta, rest, weights, rng, name, extra):
    s, r, atoms = _relabel(s, r, len(atoms_beta))
    K = atoms.size
    beta = atoms_beta[atoms]
    E, W = _edges(s, r, K, weights.lambda1, weights.lambda2, rng)
    realized = GlobalWeights(
        beta, max(1.0 - beta.sum(), 0.0), weights.gamma, weights.alpha, weights.kappa,
        weights.lambda1, weights.lambda2,
    )
    latent = {"labels": LabelState(s, r, K), "weights": realized, "W": W, **extra}
    return DatasetBundle(RelationTensor(E), None, name, latent=latent)


def generate_mtv(n: int, T: int, weights: GlobalWeights, seed) -> DatasetBundle:
    """Prior draw from the time-variant model.

    Each (node, time) membership vector is a Dirichlet draw over the
    truncated global atoms with masses ``alpha * beta + kappa / (2n) * N^{t-1}``
    (plus the leftover mass); labels are then drawn from it.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    atoms, rest = _gem(weights.gamma, rng)
    A = atoms.size
    c = weights.kappa / (2 * n)
    s = np.full((T, n, n), -1, dtype=np.int32)
    r = np.full((T, n, n), -1, dtype=np.int32)
    pis = np.zeros((T, n, A))
    prev = np.zeros((n, A))
    others = [np.array([j for j in range(n) if j != i]) for i in range(n)]
    for t in range(T):
        cur = np.zeros((n, A))
        for i in range(n):
            mass = weights.alpha * np.append(atoms, rest)
            if t > 0:
                mass[:A] += c * prev[i]
            pi = dirichlet(mass, rng)
            pis[t, i] = pi[:A]
            # leftover mass is below STICK_TOL; draws landing there are re-assigned
            z = _categorical(pi[:A], 2 * (n - 1), rng)
            s[t, i, others[i]] = z[: n - 1]
            r[t, others[i], i] = z[n - 1:]
        for i in range(n):
            cur[i] = np.bincount(s[t, i, others[i]], minlength=A) + np.bincount(r[t, others[i], i], minlength=A)
        prev = cur
    return _finish(s, r, atoms, rest, weights, rng, "mtv-prior", {"pi": pis, "atoms": atoms})


def generate_mti(n: int, T: int, weights: GlobalWeights, seed) -> DatasetBundle:
    """Prior draw from the time-invariant model.

    Node ``a`` owns an initial distribution ``Dir(alpha beta)`` and one
    distribution per previous label ``k`` with masses ``alpha beta + kappa delta_k``;
    every sender/receiver slot follows its own label chain through them.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    atoms, rest = _gem(weights.gamma, rng)
    A = atoms.size
    base = weights.alpha * np.append(atoms, rest)
    family: dict[tuple[int, int], np.ndarray] = {}

    def dist(a, p):
        key = (a, p)
        if key not in family:
            mass = base.copy()
            if p > 0:
                mass[p - 1] += weights.kappa
            family[key] = dirichlet(mass, rng)[:A]
        return family[key]

    s = np.full((T, n, n), -1, dtype=np.int32)
    r = np.full((T, n, n), -1, dtype=np.int32)
    for t in range(T):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                ps = 0 if t == 0 else s[t - 1, i, j] + 1
                pr = 0 if t == 0 else r[t - 1, i, j] + 1
                s[t, i, j] = _categorical(dist(i, ps), None, rng)
                r[t, i, j] = _categorical(dist(j, pr), None, rng)
    return _finish(s, r, atoms, rest, weights, rng, "mti-prior", {"atoms": atoms})


def draw_hyperparameters(prior: HyperPriors, rng, lambda1=1.0, lambda2=1.0) -> GlobalWeights:
    """Hyperparameters from their priors (weights left empty)."""
    gamma = rng.gamma(prior.gamma_shape, 1.0 / prior.gamma_rate)
    conc = rng.gamma(prior.conc_shape, 1.0 / prior.conc_rate)
    ratio = rng.beta(prior.ratio_a, prior.ratio_b)
    return GlobalWeights(np.zeros(0), 1.0, float(gamma), float(conc * (1 - ratio)),
                         float(conc * ratio), lambda1, lambda2)


def sampson_like(seed=0, n: int = 18, T: int = 3, picks: int = 3, groups: int = 4,
                 p_in: float = 0.85, p_stay: float = 0.8) -> DatasetBundle:
    """Each node names ``picks`` others per time step, mostly inside its own group.

    Choices persist from one time step to the next with probability ``p_stay``.
    """
    rng = np.random.default_rng(seed)
    member = np.concatenate([np.full(len(g), k) for k, g in enumerate(np.array_split(np.arange(n), groups))])
    E = np.zeros((T, n, n), dtype=np.int8)
    for i in range(n):
        same = [j for j in range(n) if j != i and member[j] == member[i]]
        other = [j for j in range(n) if j != i and member[j] != member[i]]
        chosen: list[int] = []
        for t in range(T):
            keep = [j for j in chosen if rng.random() < p_stay]
            while len(keep) < picks:
                pool = same if (rng.random() < p_in and len(set(same) - set(keep))) else other
                cand = [j for j in pool if j not in keep]
                if not cand:
                    cand = [j for j in same + other if j not in keep]
                keep.append(int(rng.choice(cand)))
            chosen = keep
            E[t, i, chosen] = 1
    return DatasetBundle(RelationTensor(E), None, "sampson-like",
                         meta={"groups": member.tolist()})


# ---------------------------------------------------------------------------
# text format


def save_dataset(bundle: DatasetBundle, path) -> None:
    data = bundle.data
    lines = ["dim3-dataset 1", f"name {bundle.name}", f"n {data.n}", f"T {data.T}"]
    if bundle.meta.get("nodes"):
        lines.append("nodes " + " ".join(map(str, bundle.meta["nodes"])))
    times = bundle.meta.get("times") or [str(t + 1) for t in range(data.T)]
    if bundle.meta.get("times"):
        lines.append("times " + " ".join(map(str, times)))
    for t in range(data.T):
        lines.append(f"time {times[t]}")
        for i in range(data.n):
            row = ["-" if i == j else str(int(data.edges[t, i, j])) for j in range(data.n)]
            lines.append(" ".join(row))
    if bundle.truth is not None:
        tr = bundle.truth
        lines.append(f"truth {tr.K}")
        if tr.case_id is not None:
            lines.append(f"case {tr.case_id}")
        lines.append("membership")
        lines += [" ".join(repr(float(v)) for v in row) for row in tr.membership]
        lines.append("compat")
        lines += [" ".join(repr(float(v)) for v in row) for row in tr.compat.entries]
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> DatasetBundle:
    path = Path(path)
    try:
        raw = path.read_text().splitlines()
    except OSError as err:
        raise DatasetFormatError(f"{path}: cannot read ({err})") from err
    rows = []
    for no, line in enumerate(raw, 1):
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append((no, line.split()))
    it = iter(rows)

    def fail(no, msg):
        raise DatasetFormatError(f"{path}:{no}: {msg}")

    def take(key):
        try:
            no, tok = next(it)
        except StopIteration:
            raise DatasetFormatError(f"{path}: unexpected end of file, expected '{key}'") from None
        if tok[0] != key:
            fail(no, f"expected '{key}', found '{tok[0]}'")
        return no, tok[1:]

    no, tok = take("dim3-dataset")
    if tok != ["1"]:
        fail(no, f"unsupported format version {' '.join(tok)!r}")
    _, tok = take("name")
    name = " ".join(tok)
    header = {}
    for key in ("n", "T"):
        no, tok = take(key)
        try:
            header[key] = int(tok[0])
        except (IndexError, ValueError):
            fail(no, f"'{key}' needs an integer")
        if header[key] < 0 or (key == "n" and header[key] < 1):
            fail(no, f"invalid {key}={header[key]}")
    n, T = header["n"], header["T"]
    meta = {}
    E = np.zeros((T, n, n), dtype=np.int8)
    truth_K = None
    case_id = None
    pending = list(it)
    pos = 0
    t = 0
    while pos < len(pending):
        no, tok = pending[pos]
        key = tok[0]
        if key in ("nodes", "times"):
            want = n if key == "nodes" else T
            if len(tok) - 1 != want:
                fail(no, f"'{key}' lists {len(tok) - 1} labels, expected {want}")
            meta[key] = tok[1:]
            pos += 1
        elif key == "time":
            if t >= T:
                fail(no, f"more than T={T} time blocks")
            for i in range(n):
                pos += 1
                if pos >= len(pending):
                    raise DatasetFormatError(f"{path}: time block {t + 1} has fewer than n={n} rows")
                rno, rtok = pending[pos]
                if len(rtok) != n:
                    fail(rno, f"row has {len(rtok)} entries, expected n={n}")
                for j, v in enumerate(rtok):
                    if i == j:
                        if v not in ("-", "0"):
                            fail(rno, f"diagonal entry must be '-', found {v!r}")
                    elif v in ("0", "1"):
                        E[t, i, j] = int(v)
                    else:
                        fail(rno, f"edge value must be 0 or 1, found {v!r}")
            t += 1
            pos += 1
        elif key == "truth":
            try:
                truth_K = int(tok[1])
            except (IndexError, ValueError):
                fail(no, "'truth' needs an integer K")
            pos += 1
            break
        else:
            fail(no, f"unexpected line starting with {key!r}")
    if t != T:
        raise DatasetFormatError(f"{path}: found {t} time blocks, expected T={T}")

    truth = None
    if truth_K is not None:
        def matrix(count, width, label):
            nonlocal pos
            out = np.empty((count, width))
            for a in range(count):
                if pos >= len(pending):
                    raise DatasetFormatError(f"{path}: truncated '{label}' block")
                rno, rtok = pending[pos]
                if len(rtok) != width:
                    fail(rno, f"'{label}' row has {len(rtok)} values, expected {width}")
                try:
                    out[a] = [float(v) for v in rtok]
                except ValueError:
                    fail(rno, f"non-numeric value in '{label}'")
                pos += 1
            return out

        if pos < len(pending) and pending[pos][1][0] == "case":
            case_id = int(pending[pos][1][1])
            pos += 1
        for label in ("membership", "compat"):
            if pos >= len(pending) or pending[pos][1][0] != label:
                raise DatasetFormatError(f"{path}: expected '{label}' block")
            pos += 1
            if label == "membership":
                member = matrix(n, truth_K, label)
            else:
                compat = matrix(truth_K, truth_K, label)
        if pos < len(pending):
            fail(pending[pos][0], "trailing content after ground truth")
        try:
            truth = GroundTruth(member, compat, case_id)
        except ValueError as err:
            raise DatasetFormatError(f"{path}: invalid ground truth ({err})") from None
    return DatasetBundle(RelationTensor(E), truth, name, meta)
