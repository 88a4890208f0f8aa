"""Exit criteria. Each test records one PASS/FAIL line (shown in the terminal
summary) and then asserts it. Long-running: about 40 minutes on one core."""
import json
import os
import signal
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from dim3.analysis import ChainTrace, geweke_z, iat, l2_compat, l2_membership, psrf
from dim3.enumerate import enumerate_exact
from dim3.generator import draw_hyperparameters, fixed_truth, generate_mtv
from dim3.gibbs import SamplerState, finite_state, gibbs_sweep_mti, gibbs_sweep_mtv
from dim3.hyper import HyperPriors
from dim3.model import GlobalWeights, RelationTensor
from dim3.runner import RunConfig, run
from dim3.slice import slice_sweep_mtv

from conftest import record

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

SEED = 0
ITERATIONS = 20_000


def _fmt(x):
    return f"{x:.3g}" if isinstance(x, float) else str(x)


# ---------------------------------------------------------------------------
# 1. enumeration oracle

ORACLE_SWEEPS = 200_000
ORACLE_BURN = 2_000
ORACLE_ALPHA, ORACLE_KAPPA = 1.0, 1.0


@pytest.fixture(scope="module")
def oracle_data():
    r = np.random.default_rng(SEED)
    return RelationTensor((r.random((2, 3, 3)) < 0.4).astype(np.int8))


@pytest.fixture(scope="module")
def oracle(oracle_data):
    w = GlobalWeights(np.ones(2) / 2, 0.0, alpha=ORACLE_ALPHA, kappa=ORACLE_KAPPA)
    return {m: enumerate_exact(oracle_data, 2, w, m) for m in ("mtv", "mti")}


def _slot_draws(data, model, step, seed):
    rng = np.random.default_rng(seed)
    st = finite_state(data, 2, model, rng, alpha=ORACLE_ALPHA, kappa=ORACLE_KAPPA)
    t, i, j = st.pairs.T
    for _ in range(ORACLE_BURN):
        step(st, rng)
    out = np.empty((ORACLE_SWEEPS, 2 * len(t)), dtype=np.int8)
    for k in range(ORACLE_SWEEPS):
        step(st, rng)
        out[k, 0::2] = st.S[t, i, j]
        out[k, 1::2] = st.R[t, i, j]
    return out


def _marginal_tv(draws, post):
    """Worst TV over all two-slot joints and over every pair's two-time joint."""
    D = post.slots
    worst = 0.0
    groups = [(a, b) for a in range(D) for b in range(a + 1, D)]
    P = post.pairs.shape[0] // 2  # pairs per time step (T = 2)
    groups += [(2 * q, 2 * q + 1, 2 * (q + P), 2 * (q + P) + 1) for q in range(P)]
    for g in groups:
        code = np.zeros(draws.shape[0], dtype=np.int64)
        for s in g:
            code = code * 2 + draws[:, s]
        emp = np.bincount(code, minlength=2 ** len(g)) / draws.shape[0]
        exact = post.marginal(list(g)).ravel()
        worst = max(worst, 0.5 * np.abs(emp - exact).sum())
    return worst


@pytest.mark.parametrize("label, model, step", [
    ("1a gibbs_sweep_mtv", "mtv", gibbs_sweep_mtv),
    ("1b slice_sweep_mtv", "mtv", slice_sweep_mtv),
    ("1c gibbs_sweep_mti", "mti", gibbs_sweep_mti),
])
def test_c1_enumeration_oracle(label, model, step, oracle_data, oracle):
    t0 = time.perf_counter()
    draws = _slot_draws(oracle_data, model, step, SEED)
    elapsed = time.perf_counter() - t0
    tv = _marginal_tv(draws, oracle[model])
    ok = record(label, tv <= 0.05 and elapsed < 300,
                f"worst marginal TV {tv:.4f} (limit 0.05), {ORACLE_SWEEPS} sweeps in {elapsed:.0f}s "
                "(limit 300s), n=3 T=2 K=2")
    assert ok


# ---------------------------------------------------------------------------
# 2. Geweke joint-distribution test

GEWEKE_N, GEWEKE_T = 4, 2
GEWEKE_PRIOR_DRAWS = 20_000
GEWEKE_SWEEPS = 100_000


def _geweke_stats(state):
    K = state.K
    n1, n0 = state.L1[:K, :K], state.L0[:K, :K]
    p1 = (n1 + state.lambda1) / (n1 + n0 + state.lambda1 + state.lambda2)
    t, i, j = state.pairs.T
    return (K, float(p1[state.S[t, i, j], state.R[t, i, j]].mean()),
            state.alpha + state.kappa, state.gamma)


def _prior_state(prior, rng):
    w = draw_hyperparameters(prior, rng)
    b = generate_mtv(GEWEKE_N, GEWEKE_T, w, rng)
    return SamplerState(b.data, b.latent["labels"], b.latent["weights"])


def _redraw_edges(state, rng):
    """Edges from the compatibility posterior given labels: closes the joint loop."""
    K = state.K
    W = rng.beta(state.L1[:K, :K] + state.lambda1, state.L0[:K, :K] + state.lambda2)
    off = ~np.eye(state.n, dtype=bool)
    p = W[np.maximum(state.S, 0), np.maximum(state.R, 0)]
    E = ((rng.random(state.E.shape) < p) & off).astype(np.int8)
    state.E[...] = E
    state.data = RelationTensor(E)
    state.rebuild()


@pytest.mark.parametrize("label, step", [("2a gibbs", gibbs_sweep_mtv), ("2b slice", slice_sweep_mtv)])
def test_c2_geweke(label, step):
    prior = HyperPriors()
    rng = np.random.default_rng(SEED + 1)
    t0 = time.perf_counter()
    marg = np.array([_geweke_stats(_prior_state(prior, rng)) for _ in range(GEWEKE_PRIOR_DRAWS)])
    st = _prior_state(prior, rng)
    succ = np.empty((GEWEKE_SWEEPS, 4))
    for k in range(GEWEKE_SWEEPS):
        step(st, rng, prior)
        _redraw_edges(st, rng)
        succ[k] = _geweke_stats(st)
    elapsed = time.perf_counter() - t0
    zs = []
    for c in range(4):
        tau = iat(succ[:, c])
        se = np.sqrt(marg[:, c].var() / len(marg) + succ[:, c].var() * 2 * tau / len(succ))
        zs.append((marg[:, c].mean() - succ[:, c].mean()) / se)
    names = ("K", "mean edge predictive", "alpha+kappa", "gamma")
    ok = record(label, max(map(abs, zs)) <= 3 and elapsed < 600,
                ", ".join(f"z({n})={z:+.2f}" for n, z in zip(names, zs))
                + f" (limit |z|<=3), {elapsed:.0f}s (limit 600s)")
    assert ok


# ---------------------------------------------------------------------------
# shared Case-1 runs (criteria 3, 4, 6)


def _case1_cfg(tmp, model, chains, **kw):
    return RunConfig(model=model, case=1, n=20, T=3, data_seed=SEED, iterations=ITERATIONS,
                     chains=chains, seed=SEED, output=str(tmp), **kw)


@pytest.fixture(scope="module")
def case1_mtv(tmp_path_factory):
    out = tmp_path_factory.mktemp("case1_mtv")
    t0 = time.perf_counter()
    summary = run(_case1_cfg(out, "mtv-gibbs", 5))
    return out, summary, time.perf_counter() - t0


@pytest.fixture(scope="module")
def case1_mti(tmp_path_factory):
    out = tmp_path_factory.mktemp("case1_mti")
    t0 = time.perf_counter()
    summary = run(_case1_cfg(out, "mti-gibbs", 1))
    return out, summary, time.perf_counter() - t0


def _estimates(out, chain=0):
    e = json.loads((out / f"estimates_chain{chain}.json").read_text())
    return np.array(e["membership"]), np.array(e["compat"])


def test_c3_recovery(case1_mtv, case1_mti):
    truth = fixed_truth(1, 20)
    out, summary, t_mtv = case1_mtv
    mode = summary["chains"]["0"]["K_mode"]
    mem, comp = _estimates(out)
    d_mem = l2_membership(mem, truth.membership)
    d_comp = l2_compat(comp, truth.compat.entries)
    out_i, summary_i, t_mti = case1_mti
    mem_i, _ = _estimates(out_i)
    d_mti = l2_membership(mem_i, truth.membership)
    # one chain of each model counts toward the 30 minute budget
    budget = t_mtv / 5 + t_mti
    ok = record("3 synthetic recovery",
                mode in (3, 4) and d_mem <= 0.45 and d_comp <= 1.0 and d_mti <= 0.30 and budget < 1800,
                f"MTV K mode {mode} (want 3 or 4), l2 membership {d_mem:.3f} (<=0.45), "
                f"l2 compat {d_comp:.3f} (<=1.0); MTI l2 membership {d_mti:.3f} (<=0.30), "
                f"MTI K mode {summary_i['chains']['0']['K_mode']}; {budget:.0f}s (limit 1800s)")
    assert ok


def test_c4_convergence(case1_mtv):
    out, summary, _ = case1_mtv
    traces = [ChainTrace.read_csv(out / f"trace_chain{c}.csv") for c in range(5)]
    r_k = psrf([t.retained("K") for t in traces])[0]
    r_d = psrf([t.retained("D") for t in traces])[0]
    z = [geweke_z(t.retained(name)) for t in traces for name in ("K", "D")]
    worst = max(map(abs, z))
    ok = record("4 convergence", r_k <= 1.2 and r_d <= 1.2 and worst <= 2.5,
                f"PSRF K {r_k:.3f}, PSRF D {r_d:.3f} (limit 1.2); Geweke z range "
                f"[{min(z):+.2f}, {max(z):+.2f}] (limit |z|<=2.5); 5 chains x {ITERATIONS}")
    assert ok


# ---------------------------------------------------------------------------
# 5. IAT trend over the (gamma, alpha) grid

GRID = (0.1, 0.5, 2.0)
GRID_ITERATIONS = 20_000


def _tau_K(trace):
    try:
        return iat(trace.retained("K", 0.25))
    except ValueError:
        return np.inf  # K never moved: the slowest possible mixing


def test_c5_iat_trend(tmp_path):
    tau = np.empty((3, 3))  # [gamma index, alpha index]
    for gi, g in enumerate(GRID):
        for ai, a in enumerate(GRID):
            out = tmp_path / f"g{gi}a{ai}"
            cfg = _case1_cfg(out, "mtv-gibbs", 1, gamma=g, alpha=a,
                             freeze=("gamma", "alpha", "kappa"))
            run(cfg.replace(iterations=GRID_ITERATIONS))
            tau[gi, ai] = _tau_K(ChainTrace.read_csv(out / "trace_chain0.csv"))
    rhos = []
    for ai in range(3):
        rhos.append(stats.spearmanr(GRID, tau[:, ai])[0])  # gamma varies, alpha fixed
    for gi in range(3):
        rhos.append(stats.spearmanr(GRID, tau[gi, :])[0])  # alpha varies, gamma fixed
    negative = sum(1 for r in rhos if r < 0)
    table = "; ".join(f"gamma={g}: " + ", ".join(_fmt(float(x)) for x in tau[gi])
                      for gi, g in enumerate(GRID))
    ok = record("5 IAT trend", negative >= 5,
                f"{negative}/6 grid lines with negative Spearman (need 5); rho = "
                + ", ".join(f"{r:+.2f}" for r in rhos) + f"; tau(K) rows over alpha {GRID}: {table}")
    assert ok


# ---------------------------------------------------------------------------
# 6. model ordering by retained log-likelihood


def _mean_ll(out, chain=0, burn_in=0.5):
    return float(ChainTrace.read_csv(out / f"trace_chain{chain}.csv").retained("loglik", burn_in).mean())


def test_c6_model_ordering(case1_mtv, case1_mti, tmp_path):
    c1 = (_mean_ll(case1_mti[0]), _mean_ll(case1_mtv[0]))
    samp = {}
    for model in ("mti-gibbs", "mtv-gibbs"):
        out = tmp_path / model
        run(RunConfig(model=model, generator="sampson", data_seed=SEED, iterations=ITERATIONS,
                      seed=SEED, output=str(out)))
        samp[model] = _mean_ll(out)
    sp = (samp["mti-gibbs"], samp["mtv-gibbs"])
    ok = record("6 model ordering", c1[0] >= c1[1] and sp[0] >= sp[1],
                f"Case 1 MTI {c1[0]:.1f} vs MTV {c1[1]:.1f}; Sampson-style MTI {sp[0]:.1f} "
                f"vs MTV {sp[1]:.1f} (mean retained log-likelihood, MTI must be >=)")
    assert ok


# ---------------------------------------------------------------------------
# 7. diagnostic calibration


def test_c7_diagnostic_calibration():
    rng = np.random.default_rng(SEED)
    white = iat(rng.normal(size=100_000))
    phi = 0.9
    x = np.empty(100_000)
    x[0] = rng.normal()
    e = rng.normal(size=x.size) * np.sqrt(1 - phi ** 2)
    for k in range(1, x.size):
        x[k] = phi * x[k - 1] + e[k]
    ar = iat(x)
    r = psrf(rng.normal(size=(2, 10_000)))[0]
    ok = record("7 diagnostic calibration",
                0.4 <= white <= 0.6 and abs(ar - 9.5) <= 0.2 * 9.5 and r <= 1.05,
                f"tau(white noise) {white:.3f} in [0.4, 0.6]; tau(AR1 0.9) {ar:.2f} vs 9.5 (+-20%); "
                f"PSRF(same distribution) {r:.4f} (<=1.05)")
    assert ok


# ---------------------------------------------------------------------------
# 8. performance


def test_c8_performance(tmp_path):
    times = {}
    for n, iters in ((20, 200), (100, 5)):
        rep = run(RunConfig(model="mtv-gibbs", case=1, n=n, T=3, data_seed=SEED, iterations=iters,
                            seed=SEED, output=str(tmp_path / f"n{n}")))
        times[n] = rep["timing"][0]["seconds_per_iteration"]
    ok = record("8 performance", times[20] < 0.5 and times[100] < 10,
                f"N=20: {times[20]:.4f} s/iter (limit 0.5); N=100: {times[100]:.3f} s/iter (limit 10); "
                "single core")
    assert ok


# ---------------------------------------------------------------------------
# 9. determinism and kill-and-resume


def _cli(*args, **kw):
    env = dict(os.environ, DIM3_MAX_WORKERS="1")
    return subprocess.Popen([sys.executable, "-m", "dim3.cli", *args], env=env,
                            stdout=subprocess.DEVNULL, stderr=subprocess.PIPE, **kw)


def _traces_equal(a, b, chains):
    return all((a / f"trace_chain{c}.csv").read_bytes() == (b / f"trace_chain{c}.csv").read_bytes()
               for c in range(chains))


def test_c9_determinism_and_resume(tmp_path):
    common = ["run", "--case", "1", "-n", "20", "-T", "3", "--seed", "3", "--chains", "2",
              "--checkpoint-every", "100"]
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert _cli(*common, "--iterations", "300", "-o", str(d)).wait() == 0
    same = _traces_equal(a, b, 2)

    full, cut = tmp_path / "full", tmp_path / "cut"
    long = [*common, "--iterations", "3000"]
    assert _cli(*long, "-o", str(full)).wait() == 0
    proc = _cli(*long, "-o", str(cut))
    ckpt = cut / "checkpoint_chain0.bin"
    deadline = time.time() + 120
    while not ckpt.exists() and time.time() < deadline and proc.poll() is None:
        time.sleep(0.02)
    time.sleep(0.3)
    proc.send_signal(signal.SIGKILL)
    proc.wait()
    interrupted = not (cut / "summary.json").exists()
    rc = _cli("resume", str(cut)).wait()
    resumed = rc == 0 and _traces_equal(full, cut, 2) and all(
        (full / f"estimates_chain{c}.json").read_bytes() == (cut / f"estimates_chain{c}.json").read_bytes()
        for c in range(2))
    ok = record("9 determinism and resume", same and interrupted and resumed,
                f"repeat run byte-identical: {same}; killed mid-run: {interrupted}; "
                f"resumed traces and estimates byte-identical to uninterrupted run: {resumed}")
    assert ok
