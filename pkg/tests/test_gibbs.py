import numpy as np
import pytest
from scipy.special import logsumexp

from dim3 import _backend
from dim3.gibbs import (
    TableCounts,
    crf_predictive,
    finite_state,
    finite_sweep,
    gibbs_sweep_mti,
    gibbs_sweep_mtv,
    init_state,
    pair_log_weights,
    resample_beta,
    sample_pair_labels,
    sweep,
    transition_counts,
)
from dim3.model import GlobalWeights

from conftest import small_network

BACKENDS = [pytest.param(_backend.python_kernels, id="python")]
if _backend.compiled_kernels is not None:
    BACKENDS.append(pytest.param(_backend.compiled_kernels, id="compiled"))


def _state(model, seed=0, n=5, T=3, K=3, **kw):
    data = small_network(n, T, seed)
    w = GlobalWeights(np.full(K, 0.2), 1 - 0.2 * K, gamma=1.5, alpha=2.0, kappa=1.5, **kw)
    return init_state(data, model, np.random.default_rng(seed), K_init=K, weights=w)


@pytest.mark.parametrize("model", ["mtv", "mti"])
def test_init_state_is_consistent(model):
    st = _state(model)
    st.check()
    assert st.K <= 3
    assert st.beta.sum() + st.beta_u == pytest.approx(1.0)
    lab = st.labels
    assert lab.used().tolist() == list(range(st.K))


@pytest.mark.parametrize("kernels", BACKENDS)
@pytest.mark.parametrize("model", ["mtv", "mti"])
def test_sweeps_keep_counts_and_weights_valid(model, kernels, rng):
    st = _state(model, n=6, T=3, K=1)
    for _ in range(15):
        sweep(st, rng, kernels=kernels)
        st.check()
        st.weights.check()
        assert st.labels.used().tolist() == list(range(st.K))
        assert st.gamma > 0 and st.alpha > 0 and st.kappa >= 0


def test_capacity_growth_inside_a_sweep(rng):
    data = small_network(6, 2, 3)
    st = init_state(data, "mtv", rng, K_init=1,
                    weights=GlobalWeights(np.array([0.01]), 0.99, gamma=50.0, alpha=50.0))
    cap = st.capacity
    for _ in range(3):
        sweep(st, rng, freeze=("gamma", "alpha"))
    assert st.K > cap and st.capacity >= st.K + 2
    st.check()


def test_transition_counts_cover_every_label(rng):
    st = _state("mti", n=5, T=4)
    TR, TOT = transition_counts(st.S, st.R, st.capacity)
    assert (TR.sum(axis=(1, 2)) == 2 * (st.n - 1) * st.T).all()
    # first restaurant gets exactly one label per chain
    assert (TOT[:, 0] == 2 * (st.n - 1)).all()
    np.testing.assert_array_equal(TOT, TR.sum(axis=2))


def test_crf_predictive_mtv():
    st = _state("mtv", K=2)
    k = 0
    t = 1
    w = crf_predictive(st, 0, k, t)
    expect = st.N[t, 0, k] + st.alpha * st.beta[k] + st.c * st.N[t - 1, 0, k]
    assert w == pytest.approx(expect)
    assert crf_predictive(st, 0, st.K, t) == pytest.approx(st.alpha * st.beta_u)


def _kernel_frequencies(st, t, i, j, draws, seed):
    rng = np.random.default_rng(seed)
    K = st.K
    counts = np.zeros((K + 1, K + 1))
    for _ in range(draws):
        c = st.copy()
        s, r = sample_pair_labels(c, t, i, j, rng)
        counts[min(s, K), min(r, K)] += 1
    return counts / draws


@pytest.mark.parametrize("model, t", [("mtv", 1), ("mtv", 0), ("mti", 1), ("mti", 2)])
def test_kernel_matches_reference_conditional(model, t):
    st = _state(model, seed=4, n=4, T=3, K=3)
    lw = pair_log_weights(st, t, 1, 2)
    p = np.exp(lw - logsumexp(lw))
    freq = _kernel_frequencies(st, t, 1, 2, 20000, 9)
    assert 0.5 * np.abs(freq - p).sum() < 0.02


def test_kernel_matches_reference_conditional_finite():
    data = small_network(4, 3, 2)
    st = finite_state(data, 3, "mti", np.random.default_rng(1), alpha=1.5, kappa=2.0)
    lw = pair_log_weights(st, 1, 0, 3)
    assert lw.shape == (3, 3)
    p = np.exp(lw - logsumexp(lw))
    rng = np.random.default_rng(2)
    counts = np.zeros((3, 3))
    for _ in range(20000):
        s, r = sample_pair_labels(st.copy(), 1, 0, 3, rng)
        counts[s, r] += 1
    assert 0.5 * np.abs(counts / 20000 - p).sum() < 0.02


@pytest.mark.skipif(_backend.compiled_kernels is None, reason="compiled kernels unavailable")
@pytest.mark.parametrize("model", ["mtv", "mti"])
def test_backends_agree_exactly(model):
    out = []
    for kern in (_backend.python_kernels, _backend.compiled_kernels):
        rng = np.random.default_rng(31)
        st = _state(model, n=5, T=2, K=2)
        for _ in range(5):
            sweep(st, rng, kernels=kern)
        out.append((st.S.copy(), st.R.copy(), st.K, st.alpha, st.gamma))
    np.testing.assert_array_equal(out[0][0], out[1][0])
    np.testing.assert_array_equal(out[0][1], out[1][1])
    assert out[0][2:] == out[1][2:]


def test_same_seed_same_chain():
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(8)
        st = _state("mtv")
        for _ in range(5):
            sweep(st, rng)
        runs.append((st.S.copy(), st.beta.copy(), st.alpha))
    np.testing.assert_array_equal(runs[0][0], runs[1][0])
    np.testing.assert_array_equal(runs[0][1], runs[1][1])


def test_freeze_holds_hyperparameters(rng):
    st = _state("mtv")
    g, a, k = st.gamma, st.alpha, st.kappa
    for _ in range(3):
        sweep(st, rng, freeze=("gamma", "kappa"))
    assert (st.gamma, st.alpha, st.kappa) == (g, a, k)
    with pytest.raises(ValueError):
        sweep(st, rng, freeze=("beta",))


def test_finite_chain_never_opens_communities(rng):
    data = small_network(5, 3, 6)
    st = finite_state(data, 3, "mtv", rng)
    for _ in range(10):
        finite_sweep(st, 3, rng)
    assert st.K == 3 and st.beta_u == 0.0
    np.testing.assert_allclose(st.beta, 1 / 3)
    assert st.S[st.S >= 0].max() < 3
    with pytest.raises(ValueError):
        finite_sweep(st, 2, rng)


def test_model_mismatch_errors(rng):
    with pytest.raises(ValueError):
        gibbs_sweep_mti(_state("mtv"), rng)
    with pytest.raises(ValueError):
        gibbs_sweep_mtv(_state("mti"), rng)
    with pytest.raises(ValueError):
        init_state(small_network(3, 1, 0), "foo")
    st = _state("mtv")
    with pytest.raises(ValueError):
        sample_pair_labels(st, 0, 1, 1, rng)


def test_resample_beta_requires_tables(rng):
    tables = TableCounts(np.array([[1, 0]]), np.array([[1, 0]]))
    with pytest.raises(ValueError):
        resample_beta(tables, 1.0, rng)
    beta, rest = resample_beta(TableCounts(np.array([[2, 1]])), 1.0, rng)
    assert beta.sum() + rest == pytest.approx(1.0)


def test_compact_returns_mass_to_remainder():
    st = _state("mtv", K=3)
    st.S[st.S == 1] = 0
    st.R[st.R == 1] = 0
    st.rebuild()
    total = st.beta.sum() + st.beta_u
    keep = st.compact()
    assert 1 not in keep.tolist()
    assert st.beta.sum() + st.beta_u == pytest.approx(total)
    st.check()


@pytest.mark.parametrize("model", ["mtv", "mti"])
def test_finite_gibbs_matches_enumeration(model):
    from dim3.enumerate import config_index, enumerate_exact

    rng = np.random.default_rng(5)
    data = small_network(2, 2, 7, density=0.5)
    w = GlobalWeights(np.ones(2) / 2, 0.0, alpha=1.0, kappa=1.5)
    post = enumerate_exact(data, 2, w, model)
    st = finite_state(data, 2, model, rng, alpha=1.0, kappa=1.5)
    iters = 30000
    idx = np.empty(iters, dtype=np.int64)
    for it in range(iters):
        sweep(st, rng)
        idx[it] = config_index(st.S, st.R, post.pairs, 2)
    emp = np.bincount(idx, minlength=post.probs.size).reshape(post.table().shape) / iters
    for a in range(post.slots):
        for b in range(a + 1, post.slots):
            others = tuple(d for d in range(post.slots) if d not in (a, b))
            assert 0.5 * np.abs(emp.sum(axis=others) - post.marginal([a, b])).sum() < 0.03
