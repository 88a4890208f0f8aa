"""Random variates that stay finite for vanishing shape parameters."""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

TINY = np.finfo(np.float64).tiny


def log_gamma_variates(shape, rng: np.random.Generator) -> np.ndarray:
    """``log G`` with ``G ~ Gamma(shape, 1)``; exact for any shape > 0.

    Uses ``G = G' * U**(1/shape)`` with ``G' ~ Gamma(shape + 1)`` so that
    tiny shapes do not underflow to zero. Zero shapes give ``-inf``.
    """
    a = np.asarray(shape, dtype=np.float64)
    g = rng.standard_gamma(a + 1.0)
    u = rng.random(a.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.log(g) + np.log(u) / a
    return np.where(a > 0, out, -np.inf)


def dirichlet(params, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet draw; components with zero parameter come out exactly 0."""
    lg = log_gamma_variates(params, rng)
    return np.exp(lg - logsumexp(lg))


def beta_variate(a: float, b: float, rng: np.random.Generator) -> float:
    """Beta draw via log-gammas; ``b == 0`` returns 1 and ``a == 0`` returns 0."""
    la, lb = log_gamma_variates(np.array([a, b]), rng)
    if lb == -np.inf:
        return 1.0
    if la == -np.inf:
        return 0.0
    return float(np.exp(la - np.logaddexp(la, lb)))


def log_beta_variate(a: float, b: float, rng: np.random.Generator) -> float:
    """``log X`` with ``X ~ Beta(a, b)``, finite even when ``X`` underflows."""
    la, lb = log_gamma_variates(np.array([a, b]), rng)
    if la == -np.inf:
        return -np.inf
    return float(la - np.logaddexp(la, lb))
