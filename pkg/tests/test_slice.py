import numpy as np
import pytest

from dim3.enumerate import config_index, enumerate_exact
from dim3.gibbs import finite_state, init_state
from dim3.model import GlobalWeights
from dim3.slice import extend_sticks, sample_slices, sample_sticks, slice_sweep_mtv

from conftest import small_network


def _state(rng, n=5, T=3):
    w = GlobalWeights(np.full(2, 0.3), 0.4, gamma=2.0, alpha=2.0, kappa=1.0)
    return init_state(small_network(n, T, 2), "mtv", rng, K_init=2, weights=w)


def test_sticks_sum_to_one(rng):
    st = _state(rng)
    sticks = sample_sticks(st, 1, rng)
    np.testing.assert_allclose(sticks.pi.sum(axis=1) + sticks.rest, 1.0)
    assert sticks.pi.shape == (st.n, st.K)


def test_extension_covers_every_slice(rng):
    st = _state(rng)
    sticks = sample_slices(st, sample_sticks(st, 0, rng), rng)
    K0 = st.K
    opened = extend_sticks(st, sticks, rng)
    assert st.K == K0 + opened
    assert (sticks.rest < sticks.row_min_slice()).all()
    np.testing.assert_allclose(sticks.pi.sum(axis=1) + sticks.rest, 1.0)
    assert st.beta.sum() + st.beta_u == pytest.approx(1.0)


def test_slice_sweeps_keep_state_valid(rng):
    st = _state(rng, n=6)
    for _ in range(15):
        slice_sweep_mtv(st, rng)
        st.check()
        st.weights.check()
        assert st.labels.used().tolist() == list(range(st.K))


def test_slice_rejects_mti(rng):
    st = init_state(small_network(4, 2, 0), "mti", rng)
    with pytest.raises(ValueError):
        slice_sweep_mtv(st, rng)


def test_finite_slice_matches_enumeration():
    rng = np.random.default_rng(3)
    data = small_network(2, 2, 7, density=0.5)
    w = GlobalWeights(np.ones(2) / 2, 0.0, alpha=1.0, kappa=1.5)
    post = enumerate_exact(data, 2, w, "mtv")
    st = finite_state(data, 2, "mtv", rng, alpha=1.0, kappa=1.5)
    iters = 20000
    idx = np.empty(iters, dtype=np.int64)
    for it in range(iters):
        slice_sweep_mtv(st, rng)
        idx[it] = config_index(st.S, st.R, post.pairs, 2)
    emp = np.bincount(idx, minlength=post.probs.size).reshape(post.table().shape) / iters
    for a in range(post.slots):
        for b in range(a + 1, post.slots):
            others = tuple(d for d in range(post.slots) if d not in (a, b))
            tv = 0.5 * np.abs(emp.sum(axis=others) - post.marginal([a, b])).sum()
            assert tv < 0.03, (a, b, tv)
