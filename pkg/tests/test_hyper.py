import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln

from dim3._rand import beta_variate, dirichlet, log_beta_variate, log_gamma_variates
from dim3.gibbs import draw_table_counts
from dim3.hyper import (
    ARSError,
    HyperPriors,
    ars_sample,
    gamma_log_posterior,
    grid_sample,
    sample_concentration,
    sample_gamma,
    sample_ratio,
)
from dim3.stirling import StirlingTable


def test_stirling_known_values():
    st = StirlingTable(4)
    assert math.exp(st.log(4, 2)) == pytest.approx(11)
    assert math.exp(st.log(5, 3)) == pytest.approx(35)  # grows on demand
    assert st.log(3, 0) == -np.inf and st.log(0, 0) == 0.0
    assert st.log(2, 3) == -np.inf
    # row sums are N!
    for N in range(1, 9):
        assert np.logaddexp.reduce(st.rows([N])[0]) == pytest.approx(gammaln(N + 1))


def test_table_counts_match_exact_distribution(rng):
    st = StirlingTable(8)
    N, a = 6, 1.7
    draws = draw_table_counts(np.full(40000, N), a, st, rng)
    m = np.arange(N + 1)
    logp = st.rows([N])[0] + m * np.log(a) + gammaln(a) - gammaln(a + N)
    p = np.exp(logp)
    assert p.sum() == pytest.approx(1.0)
    freq = np.bincount(draws, minlength=N + 1) / draws.size
    assert np.abs(freq - p).sum() / 2 < 0.01
    assert draw_table_counts(np.zeros(3, dtype=int), 1.0, st, rng).tolist() == [0, 0, 0]


def test_log_gamma_variates_tiny_shape(rng):
    x = log_gamma_variates(np.full(1000, 1e-8), rng)
    assert np.isfinite(x).all()
    assert (log_gamma_variates(np.zeros(3), rng) == -np.inf).all()
    lg = log_gamma_variates(np.full(20000, 2.5), rng)
    assert stats.kstest(np.exp(lg), stats.gamma(2.5).cdf).pvalue > 1e-3


def test_beta_and_dirichlet(rng):
    x = np.array([beta_variate(2.0, 3.0, rng) for _ in range(5000)])
    assert stats.kstest(x, stats.beta(2, 3).cdf).pvalue > 1e-3
    assert beta_variate(1.0, 0.0, rng) == 1.0 and beta_variate(0.0, 1.0, rng) == 0.0
    assert np.isfinite(log_beta_variate(1e-9, 5.0, rng))
    d = dirichlet(np.array([1.0, 0.0, 2.0]), rng)
    assert d[1] == 0.0 and d.sum() == pytest.approx(1.0)


def test_ars_standard_normal(rng):
    xs = [ars_sample(lambda x: -0.5 * x * x, lambda x: -x, [-1.0, 1.0], rng) for _ in range(4000)]
    assert stats.kstest(xs, "norm").pvalue > 1e-3


def test_ars_bounded_beta(rng):
    a, b = 3.0, 2.0
    h = lambda x: (a - 1) * math.log(x) + (b - 1) * math.log1p(-x)  # noqa: E731
    dh = lambda x: (a - 1) / x - (b - 1) / (1 - x)  # noqa: E731
    xs = [ars_sample(h, dh, [0.2, 0.5, 0.9], rng, lower=0.0, upper=1.0) for _ in range(4000)]
    assert stats.kstest(xs, stats.beta(a, b).cdf).pvalue > 1e-3


def test_ars_rejects_convex_density(rng):
    with pytest.raises(ARSError):
        ars_sample(lambda x: 0.5 * x * x, lambda x: x, [-1.0, 0.5, 1.0], rng, lower=-2, upper=2)


def test_grid_sample_matches_ars_for_gamma(rng):
    prior = HyperPriors()
    h, dh = gamma_log_posterior(4, 11, prior)
    a = np.array([ars_sample(h, dh, [-2.0, 0.0, 2.0], rng) for _ in range(3000)])
    g = np.array([grid_sample(h, -12.0, 8.0, rng, points=4096) for _ in range(3000)])
    assert stats.ks_2samp(a, g).pvalue > 1e-3


def test_gamma_posterior_without_tables_is_the_prior(rng):
    prior = HyperPriors(gamma_shape=2.0, gamma_rate=0.5)
    xs = [sample_gamma(0, 0, prior, rng) for _ in range(4000)]
    assert stats.kstest(xs, stats.gamma(2.0, scale=2.0).cdf).pvalue > 1e-3
    with pytest.raises(ValueError):
        sample_gamma(3, 2, prior, rng)


def test_gamma_log_density_matches_direct_formula():
    prior = HyperPriors(1.5, 2.0)
    h, dh = gamma_log_posterior(3, 9, prior)
    diffs = []
    for g in (0.05, 0.7, 4.0):
        x = math.log(g)
        # Gamma prior, gamma^K Gamma(g) / Gamma(g + tables), Jacobian g
        direct = ((prior.gamma_shape - 1) * x - prior.gamma_rate * g + 3 * x
                  + math.lgamma(g) - math.lgamma(g + 9) + x)
        diffs.append(h(x) - direct)
        eps = 1e-6
        assert dh(x) == pytest.approx((h(x + eps) - h(x - eps)) / (2 * eps), rel=1e-5)
    np.testing.assert_allclose(diffs, diffs[0], atol=1e-9)


def test_concentration_invariance(rng):
    """Prior draw -> tables given conc -> conc update leaves the prior invariant."""
    prior = HyperPriors(conc_shape=2.0, conc_rate=1.0)
    st = StirlingTable(10)
    cust = np.array([4, 7, 10])
    out = []
    for _ in range(4000):
        conc = rng.gamma(prior.conc_shape, 1.0 / prior.conc_rate)
        m = draw_table_counts(cust, conc, st, rng)
        out.append(sample_concentration(cust, m, prior, rng, current=conc).conc)
    assert stats.kstest(out, stats.gamma(2.0).cdf).pvalue > 1e-3


def test_ratio_conjugate_and_tilted(rng):
    prior = HyperPriors(ratio_a=2.0, ratio_b=3.0)
    xs = [sample_ratio(3, 1, prior, rng) for _ in range(4000)]
    assert stats.kstest(xs, stats.beta(5, 4).cdf).pvalue > 1e-3
    tilted = np.mean([sample_ratio(3, 1, prior, rng, tilt=4.0) for _ in range(2000)])
    assert tilted > np.mean(xs) + 0.05
    assert all(0 < sample_ratio(0, 0, HyperPriors(ratio_a=0.3), rng, tilt=1.0) < 1 for _ in range(50))


def test_priors_must_be_positive():
    with pytest.raises(ValueError):
        HyperPriors(gamma_shape=0.0)
