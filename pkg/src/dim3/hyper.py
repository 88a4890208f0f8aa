"""Hyperparameter updates: top-level concentration, total concentration and sticky share.

The top-level concentration is drawn on the log scale by adaptive rejection
sampling.  The total concentration ``alpha + kappa`` and the sticky share
``kappa / (alpha + kappa)`` use the beta-augmentation of the Gamma-function
ratios that appear in the table likelihood, which keeps both updates exact
even though restaurants differ in their total base mass.
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import digamma, logsumexp

from ._rand import beta_variate, log_gamma_variates

log = logging.getLogger(__name__)

__all__ = [
    "HyperPriors",
    "ARSError",
    "ars_sample",
    "grid_sample",
    "gamma_log_posterior",
    "sample_gamma",
    "sample_concentration",
    "sample_ratio",
    "ConcentrationDraw",
]


@dataclass(frozen=True)
class HyperPriors:
    """Gamma(shape, rate) priors on the concentrations; Beta prior on the share."""

    gamma_shape: float = 1.0
    gamma_rate: float = 1.0
    conc_shape: float = 1.0
    conc_rate: float = 1.0
    ratio_a: float = 1.0
    ratio_b: float = 1.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v!r}")


class ARSError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# adaptive rejection sampling


def _segment_logmass(h, s, x, a, b):
    """log of the integral of exp(h + s (u - x)) over [a, b]."""
    if b <= a:
        return -math.inf
    if s == 0.0:
        return h + math.log(b - a) if math.isfinite(b - a) else math.inf
    if s > 0:
        if not math.isfinite(b):
            return math.inf
        w = s * (b - a)
        return h + s * (b - x) + math.log(-math.expm1(-w)) - math.log(s)
    if not math.isfinite(a):
        return math.inf
    w = -s * (b - a)
    return h + s * (a - x) + math.log(-math.expm1(-w)) - math.log(-s)


def _segment_draw(s, a, b, u):
    """Inverse-CDF draw from the density proportional to exp(s x) on [a, b]."""
    if s == 0.0:
        return a + u * (b - a)
    if s > 0:
        # anchored at b to avoid overflow; expm1/log1p keep tiny slopes exact
        w = s * (b - a) if math.isfinite(a) else math.inf
        return b + math.log1p((1.0 - u) * math.expm1(-w)) / s
    w = -s * (b - a) if math.isfinite(b) else math.inf
    return a + math.log1p(u * math.expm1(-w)) / s


def ars_sample(
    h: Callable[[float], float],
    dh: Callable[[float], float],
    init,
    rng: np.random.Generator,
    lower: float = -math.inf,
    upper: float = math.inf,
    max_iter: int = 200,
) -> float:
    """One draw from the log-concave density ``exp(h)`` on ``(lower, upper)``.

    Tangent-line envelope over the abscissae ``init`` (refined on every
    rejection).  For unbounded ends the outermost abscissae are pushed
    outwards until the tangent slopes bracket the mode.
    """
    xs = sorted(float(v) for v in init)
    if len(xs) < 2:
        raise ARSError("need at least two abscissae")
    if not math.isfinite(lower):
        for _ in range(60):
            if dh(xs[0]) > 0:
                break
            xs.insert(0, xs[0] - 2.0 * max(1.0, xs[-1] - xs[0]))
        else:
            raise ARSError("could not bracket the mode from the left")
    if not math.isfinite(upper):
        for _ in range(60):
            if dh(xs[-1]) < 0:
                break
            xs.append(xs[-1] + 2.0 * max(1.0, xs[-1] - xs[0]))
        else:
            raise ARSError("could not bracket the mode from the right")

    hx = [float(h(x)) for x in xs]
    sx = [float(dh(x)) for x in xs]
    for _ in range(max_iter):
        m = len(xs)
        if not all(map(math.isfinite, hx)) or not all(map(math.isfinite, sx)):
            raise ARSError("non-finite log density at an abscissa")
        for j in range(m - 1):
            if sx[j + 1] - sx[j] > 1e-8 * (1 + abs(sx[j])):
                raise ARSError("log density is not concave at the abscissae")
        # tangent intersections
        z = [lower] + [0.0] * (m - 1) + [upper]
        for j in range(m - 1):
            ds = sx[j] - sx[j + 1]
            if ds <= 1e-12 * (1 + abs(sx[j])):
                zj = 0.5 * (xs[j] + xs[j + 1])
            else:
                zj = (hx[j + 1] - hx[j] - xs[j + 1] * sx[j + 1] + xs[j] * sx[j]) / ds
            z[j + 1] = min(max(zj, xs[j]), xs[j + 1])
        logm = [_segment_logmass(hx[j], sx[j], xs[j], z[j], z[j + 1]) for j in range(m)]
        top = max(logm)
        if top == math.inf or not math.isfinite(top):
            raise ARSError("envelope is not integrable")
        cum = []
        acc = 0.0
        for v in logm:
            acc += math.exp(v - top)
            cum.append(acc)
        u1, u2, u3 = rng.random(3)
        target = u1 * acc
        j = next((k for k, c in enumerate(cum) if c > target), m - 1)
        x = _segment_draw(sx[j], z[j], z[j + 1], u2)
        x = min(max(x, z[j]), z[j + 1])
        upper_hull = hx[j] + sx[j] * (x - xs[j])
        hxv = float(h(x))
        if math.log(u3) <= hxv - upper_hull:
            return float(x)
        k = bisect.bisect_left(xs, x)
        if k < m and xs[k] == x:
            continue
        xs.insert(k, x)
        hx.insert(k, hxv)
        sx.insert(k, float(dh(x)))
    raise ARSError("too many rejections")


def grid_sample(h, lo, hi, rng, points=1024) -> float:
    """Griddy-Gibbs draw: pick a cell of a uniform grid by ``exp(h)``, jitter inside it."""
    grid = np.linspace(lo, hi, points)
    lw = np.array([h(x) for x in grid])
    lw[~np.isfinite(lw)] = -np.inf
    p = np.exp(lw - logsumexp(lw))
    k = int(rng.choice(points, p=p))
    step = (hi - lo) / (points - 1)
    return float(np.clip(grid[k] + (rng.random() - 0.5) * step, lo, hi))


# ---------------------------------------------------------------------------
# top-level concentration


def gamma_log_posterior(K: int, tables: int, prior: HyperPriors):
    """Log density of ``x = log gamma`` and its derivative.

    ``K`` communities seated over ``tables`` top-level tables:
    ``p(gamma) gamma^K Gamma(gamma) / Gamma(gamma + tables)`` times the
    Jacobian ``gamma``.
    """
    a = prior.gamma_shape + K
    b = prior.gamma_rate

    # lgamma(g) = lgamma(g + 1) - log g keeps tiny g finite
    def h(x):
        g = math.exp(x)
        out = a * x - b * g
        if tables:
            out += math.lgamma(g + 1) - x - math.lgamma(g + tables)
        return out

    def dh(x):
        g = math.exp(x)
        out = a - b * g
        if tables:
            out += g * (digamma(g + 1) - digamma(g + tables)) - 1.0
        return out

    return h, dh


GAMMA_INIT = np.linspace(np.log(0.01), np.log(100.0), 5)
GAMMA_GRID = (np.log(1e-6), np.log(1e6))


def _sample_gamma(K, tables, prior, rng):
    h, dh = gamma_log_posterior(K, tables, prior)
    try:
        return float(np.exp(ars_sample(h, dh, GAMMA_INIT, rng))), False
    except ARSError as err:
        log.warning("ARS failed for gamma (%s); using grid fallback", err)
        return float(np.exp(grid_sample(h, *GAMMA_GRID, rng))), True


def sample_gamma(K: int, total_tables: int, prior: HyperPriors,
                 rng: np.random.Generator) -> float:
    """Draw the top-level concentration given ``K`` communities and their table total."""
    if K < 0 or total_tables < K:
        raise ValueError("need 0 <= K <= total_tables")
    return _sample_gamma(K, total_tables, prior, rng)[0]


# ---------------------------------------------------------------------------
# alpha + kappa and kappa / (alpha + kappa)


class ConcentrationDraw(NamedTuple):
    conc: float
    tilt: float  # exponent multiplying the sticky share in its conditional


def sample_concentration(customers, tables, prior: HyperPriors, rng: np.random.Generator,
                         current: float = 1.0, shrink=None, ratio: float = 0.0
                         ) -> ConcentrationDraw:
    """Update ``alpha + kappa`` from restaurant customer and table totals.

    Restaurant ``r`` has total base mass ``conc * (1 - ratio * shrink[r])``
    (``shrink`` defaults to 0, i.e. mass ``conc``).  Auxiliary
    ``w_r ~ Beta(mass_r, customers_r)`` turn the Gamma-function ratios into
    a Gamma full conditional.  Empty restaurants carry no information.

    Also returns the tilt ``-conc * sum_r shrink_r log w_r`` that the
    auxiliary variables put on the sticky share (see :func:`sample_ratio`).
    """
    M = np.asarray(customers, dtype=np.float64).ravel()
    m = np.asarray(tables, dtype=np.float64).ravel()
    d = np.zeros_like(M) if shrink is None else np.asarray(shrink, dtype=np.float64).ravel()
    keep = M > 0
    M, m, d = M[keep], m[keep], d[keep]
    f = 1.0 - ratio * d
    if M.size == 0:
        return ConcentrationDraw(float(rng.gamma(prior.conc_shape, 1.0 / prior.conc_rate)), 0.0)
    mass = current * f
    la = log_gamma_variates(mass, rng)
    lb = log_gamma_variates(M, rng)
    log_w = la - np.logaddexp(la, lb)
    shape = prior.conc_shape + m.sum()
    rate = prior.conc_rate - np.sum(f * log_w)
    conc = float(rng.gamma(shape, 1.0 / rate))
    return ConcentrationDraw(conc, float(-conc * np.sum(d * log_w)))


def sample_ratio(sticky: float, unsticky: float, prior: HyperPriors,
                 rng: np.random.Generator, tilt: float = 0.0) -> float:
    """Draw ``kappa / (alpha + kappa)``.

    ``sticky`` and ``unsticky`` are the totals of ``m - m_hat`` and ``m_hat``.
    With ``tilt == 0`` this is the conjugate Beta update; a positive tilt
    multiplies the density by ``exp(tilt * ratio)`` and is sampled by ARS.
    """
    a = prior.ratio_a + sticky
    b = prior.ratio_b + unsticky
    if tilt == 0.0:
        return min(max(beta_variate(a, b, rng), 1e-300), 1.0 - 1e-16)

    def h(x):
        if not 0.0 < x < 1.0:
            return -math.inf
        return (a - 1) * math.log(x) + (b - 1) * math.log1p(-x) + tilt * x

    def dh(x):
        return (a - 1) / x - (b - 1) / (1 - x) + tilt

    eps = 1e-12
    if a >= 1 and b >= 1:
        init = np.clip([a / (a + b), 0.02, 0.25, 0.5, 0.75, 0.98], eps, 1 - eps)
        try:
            x = ars_sample(h, dh, np.unique(init), rng, lower=0.0, upper=1.0)
            return min(max(x, 1e-300), 1.0 - 1e-16)
        except ARSError as err:
            log.warning("ARS failed for ratio (%s); using grid fallback", err)
    return grid_sample(h, eps, 1 - eps, rng)
