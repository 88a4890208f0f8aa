import itertools

import numpy as np
import pytest

from dim3.analysis import (
    ChainTrace,
    MembershipAccumulator,
    align_communities,
    autocorrelation,
    density_D,
    geweke_z,
    iat,
    l2_compat,
    l2_membership,
    loglik_summary,
    psrf,
    state_density_D,
)
from dim3.gibbs import init_state

from conftest import small_network


def ar1(phi, M, rng):
    x = np.empty(M)
    x[0] = rng.normal()
    e = rng.normal(size=M) * np.sqrt(1 - phi ** 2)
    for k in range(1, M):
        x[k] = phi * x[k - 1] + e[k]
    return x


def test_autocorrelation_white_noise(rng):
    rho = autocorrelation(rng.normal(size=5000))
    assert rho[0] == 1.0
    assert np.abs(rho[1:20]).max() < 0.06


def test_iat_ar1(rng):
    # for AR(1) the integrated time is (1 + phi) / (2 (1 - phi))
    x = ar1(0.8, 100_000, rng)
    assert iat(x) == pytest.approx(0.5 * 1.8 / 0.2, rel=0.15)
    assert iat(rng.normal(size=20000)) == pytest.approx(0.5, abs=0.05)


def test_iat_errors():
    with pytest.raises(ValueError):
        iat(np.ones(100))
    with pytest.raises(ValueError):
        iat(np.arange(5.0))


def test_psrf_near_one_for_identical_targets(rng):
    chains = rng.normal(size=(5, 2000))
    est, upper = psrf(chains)
    assert 0.99 < est < 1.01 and upper >= est
    shifted = chains + np.arange(5)[:, None]
    assert psrf(shifted)[0] > 1.5
    with pytest.raises(ValueError):
        psrf(chains[:1])


def test_geweke_calibrated_on_stationary_series(rng):
    z = np.array([geweke_z(ar1(0.5, 4000, rng)) for _ in range(200)])
    assert abs(z.mean()) < 0.25
    assert 0.7 < z.std() < 1.4
    drift = np.linspace(0, 5, 4000) + rng.normal(size=4000)
    assert abs(geweke_z(drift)) > 5
    with pytest.raises(ValueError):
        geweke_z(np.arange(50.0))


def test_align_identity_and_swap():
    m = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8], [0.3, 0.6, 0.1]])
    np.testing.assert_array_equal(align_communities(m, m), [0, 1, 2])
    swapped = m[:, [2, 0, 1]]
    perm = align_communities(swapped, m)
    np.testing.assert_allclose(swapped[:, perm], m)
    assert l2_membership(swapped, m) == pytest.approx(0.0)
    assert l2_membership(np.array([[0.0, 1.0, 0.0]]), np.array([[1.0, 0.0, 0.0]])) == 0.0


def test_align_pads_different_sizes():
    truth = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    est = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])
    perm = align_communities(est, truth)
    assert sorted(perm.tolist()) == [0, 1, 2]
    assert l2_membership(est, truth) < l2_membership(est, truth[:, [2, 1, 0]], aligned=True) + 1e-12


def test_compat_alignment():
    W = np.array([[0.9, 0.1, 0.2], [0.05, 0.8, 0.1], [0.3, 0.2, 0.6]])
    p = [1, 2, 0]
    est = W[np.ix_(p, p)]
    assert l2_compat(est, W) == pytest.approx(0.0)
    assert l2_compat(est, W, aligned=True) > 0.1


def test_hungarian_agrees_with_exhaustive_on_clear_cases(rng):
    truth = np.eye(9)[rng.integers(0, 9, 60)]
    perm = rng.permutation(9)
    est = truth[:, np.argsort(perm)] + rng.normal(scale=0.01, size=truth.shape)
    fast = align_communities(est, truth, exhaustive=False)
    np.testing.assert_array_equal(fast, perm)


def test_density_D_matches_loop(rng):
    st = init_state(small_network(4, 2, 1), "mtv", rng, K_init=3)
    K = st.K
    N = st.participation()
    p1 = (st.L1[:K, :K] + 1) / (st.L1[:K, :K] + st.L0[:K, :K] + 2)
    T, n = st.T, st.n
    total = 0.0
    for t, i, j in itertools.product(range(T), range(n), range(n)):
        if i == j:
            continue
        pe = p1 if st.E[t, i, j] else 1 - p1
        total += np.log(N[t, i] @ pe @ N[t, j] / (4 * n * n * T))
    assert state_density_D(st) == pytest.approx(-2 * total)
    perm = np.arange(K)[::-1]
    assert density_D(N[..., perm], st.L1[:K, :K][np.ix_(perm, perm)],
                     st.L0[:K, :K][np.ix_(perm, perm)], st.E) == pytest.approx(-2 * total)


def test_loglik_summary():
    mean, (lo, hi) = loglik_summary(np.r_[np.zeros(10), np.arange(10.0)])
    assert mean == 4.5 and lo < mean < hi
    with pytest.raises(ValueError):
        loglik_summary([1.0])


def test_trace_round_trip(tmp_path):
    tr = ChainTrace(chain=2)
    tr.append(1, 3, 10.5, -3.25, 1.0, 2.0, 0.1)
    tr.append(2, 4, 0.1 + 0.2, -3.0, 1.5, 2.5, 0.2)
    p = tmp_path / "t.csv"
    tr.write_csv(p)
    back = ChainTrace.read_csv(p)
    assert back == tr
    with pytest.raises(ValueError):
        tr.append(2, 1, 0, 0, 1, 1, 1)


def test_accumulator_undoes_label_switching():
    m = np.array([[0.8, 0.2], [0.1, 0.9], [0.5, 0.5]])
    W = np.array([[0.9, 0.1], [0.2, 0.7]])
    acc = MembershipAccumulator()
    for k in range(6):
        p = [0, 1] if k % 2 == 0 else [1, 0]
        acc.add(m[:, p], W[np.ix_(p, p)])
    np.testing.assert_allclose(acc.membership, m)
    np.testing.assert_allclose(acc.compat, W)
    acc.add(np.c_[m, np.zeros(3)], np.pad(W, ((0, 1), (0, 1))))
    assert acc.membership.shape == (3, 3)
