"""Zero-inflated Skellam distribution in the mean-overdispersion parametrization.

The distribution of an integer price change y is a two-component mixture: a
point mass at zero with probability ``pi`` and a Skellam variable (difference
of two independent Poissons) with probability ``1 - pi``.  Instead of the
usual (mean, variance) pair, the Skellam component is parametrized by its mean
``mu`` and the overdispersion ``delta = variance - |mu|``, which keeps the
admissible region a simple product set (``delta > 0``) under any dynamics.

The implied Poisson rates are ``lam1 = (|mu| + mu + delta) / 2`` and
``lam2 = (|mu| - mu + delta) / 2``.

Everything is computed in log scale on top of a log modified Bessel function
of the first kind, so the PMF and scores stay finite far into the tails.  The
scalar kernels are numba-compiled because the score-driven filter calls them
once per tick inside a sequential recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "ZiSkellamParams",
    "log_bessel_i",
    "log_pmf",
    "moments",
    "sample",
    "score_logdelta",
    "score_logit_pi",
    "score_mu",
]

# Power series is used up to this argument; beyond it the downward (Miller)
# recurrence is both faster and safe from term-count blowup.
_SERIES_X_MAX = 30.0

_NEG_INF = float("-inf")


# ---------------------------------------------------------------------------
# log I_nu(x) kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _log_bessel_series(nu: int, x: float) -> float:
    # Sum_k (x/2)^(2k+nu) / (k! (k+nu)!), factored as t0 * sum of ratios.
    # All terms are positive, and the ratio sum is bounded by I_0(x) <= e^x,
    # so linear-space accumulation cannot overflow for x <= ~600.
    q = 0.25 * x * x
    term = 1.0
    s = 1.0
    for k in range(1, 1000):
        term *= q / (k * (k + nu))
        s += term
        if term < s * 1e-18:
            break
    return math.log(s) + nu * math.log(0.5 * x) - math.lgamma(nu + 1.0)


@njit(cache=True, nogil=True)
def _log_bessel_miller(nu: int, x: float) -> float:
    # Downward recurrence p_{k-1} = (2k/x) p_k + p_{k+1}, normalized through
    # e^x = I_0(x) + 2 sum_{k>=1} I_k(x).  Stable for all orders; used for
    # large arguments where the series needs too many terms.
    m = int(x) if x > nu else nu
    m += int(10.0 * math.sqrt(float(m) + 1.0)) + 40
    pkp1 = 0.0
    pk = 1e-280
    total = 0.0
    saved = 0.0
    shift = 0.0
    for k in range(m, 0, -1):
        pkm1 = (2.0 * k / x) * pk + pkp1
        pkp1 = pk
        pk = pkm1
        total += 2.0 * pkp1
        if k - 1 == nu:
            saved = pk
        if pk > 1e250:
            pk *= 1e-250
            pkp1 *= 1e-250
            total *= 1e-250
            saved *= 1e-250
            shift += 250.0 * math.log(10.0)
            # saved may not be set yet; once set it scales with everything else
    total += pk
    if nu == 0:
        saved = pk
    if saved <= 0.0:
        return _NEG_INF
    return math.log(saved) - math.log(total) + x


@njit(cache=True, nogil=True)
def _log_bessel_i(nu: int, x: float) -> float:
    if nu < 0:
        nu = -nu
    if x == 0.0:
        return 0.0 if nu == 0 else _NEG_INF
    if x <= _SERIES_X_MAX:
        return _log_bessel_series(nu, x)
    return _log_bessel_miller(nu, x)


# ---------------------------------------------------------------------------
# scalar PMF and score kernels (shared with the filter recursion)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _bessel_arg(mu: float, delta: float) -> float:
    # sqrt(delta^2 + 2|mu|delta) = 2 sqrt(lam1 lam2)
    return math.sqrt(delta * (delta + 2.0 * abs(mu)))


@njit(cache=True, nogil=True)
def _log_pmf(y: int, mu: float, delta: float, pi: float) -> float:
    am = abs(mu)
    x = _bessel_arg(mu, delta)
    if y == 0:
        base = -am - delta + _log_bessel_i(0, x)
        if pi <= 0.0:
            return base
        a = math.log(pi)
        b = math.log1p(-pi) + base
        hi = a if a > b else b
        return hi + math.log(math.exp(a - hi) + math.exp(b - hi))
    # (lam1/lam2)^(y/2) with lam1 = (|mu|+mu+delta)/2, lam2 = (|mu|-mu+delta)/2
    tilt = 0.0
    if mu != 0.0:
        tilt = 0.5 * y * (math.log(am + mu + delta) - math.log(am - mu + delta))
    out = -am - delta + tilt + _log_bessel_i(abs(y), x)
    if pi > 0.0:
        out += math.log1p(-pi)
    return out


@njit(cache=True, nogil=True)
def _score_logdelta(y: int, mu: float, delta: float, pi: float) -> float:
    # d log P / d ln(delta)
    am = abs(mu)
    x = _bessel_arg(mu, delta)
    if y == 0:
        l0 = _log_bessel_i(0, x)
        r1 = math.exp(_log_bessel_i(1, x) - l0)
        num = delta * ((delta + am) * r1 / x - 1.0)
        if pi <= 0.0:
            return num
        return (1.0 - pi) * num / ((1.0 - pi) + pi * math.exp(am + delta - l0))
    a = abs(y)
    la = _log_bessel_i(a, x)
    ratio = 0.5 * (math.exp(_log_bessel_i(a - 1, x) - la)
                   + math.exp(_log_bessel_i(a + 1, x) - la))
    return (delta * (delta + am) / x) * ratio - mu * y / (delta + 2.0 * am) - delta


@njit(cache=True, nogil=True)
def _score_mu_signed(y: int, mu: float, delta: float, pi: float) -> float:
    # Valid branch for mu > 0; callers reduce other signs to this one.
    x = _bessel_arg(mu, delta)
    if y == 0:
        l0 = _log_bessel_i(0, x)
        r1 = math.exp(_log_bessel_i(1, x) - l0)
        num = delta * r1 / x - 1.0
        if pi <= 0.0:
            return num
        return (1.0 - pi) * num / ((1.0 - pi) + pi * math.exp(mu + delta - l0))
    a = abs(y)
    la = _log_bessel_i(a, x)
    ratio = 0.5 * (math.exp(_log_bessel_i(a - 1, x) - la)
                   + math.exp(_log_bessel_i(a + 1, x) - la))
    return -1.0 + y / (2.0 * mu + delta) + ratio * delta / x


@njit(cache=True, nogil=True)
def _score_mu(y: int, mu: float, delta: float, pi: float) -> float:
    # |mu| is not differentiable at 0; the two one-sided derivatives average
    # to y / delta there (the Bessel-ratio and sign terms cancel).
    if mu > 0.0:
        return _score_mu_signed(y, mu, delta, pi)
    if mu < 0.0:
        return -_score_mu_signed(-y, -mu, delta, pi)
    if y == 0:
        return 0.0
    return y / delta


@njit(cache=True, nogil=True)
def _score_logit_pi(y: int, mu: float, delta: float, pi: float) -> float:
    if y != 0:
        return -pi
    am = abs(mu)
    x = _bessel_arg(mu, delta)
    s = math.exp(-am - delta + _log_bessel_i(0, x))
    return pi * (1.0 - pi) * (1.0 - s) / (pi + (1.0 - pi) * s)


@njit(cache=True, nogil=True)
def _log_pmf_batch(ys: np.ndarray, mu: float, delta: float, pi: float) -> np.ndarray:
    out = np.empty(ys.size)
    for i in range(ys.size):
        out[i] = _log_pmf(ys[i], mu, delta, pi)
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZiSkellamParams:
    """Distribution state at one observation: mean, overdispersion, inflation."""

    mu: float
    delta: float
    pi: float = 0.0

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 0.0 <= self.pi < 1.0:
            raise ValueError(f"pi must be in [0, 1), got {self.pi}")

    @property
    def lam1(self) -> float:
        return 0.5 * (abs(self.mu) + self.mu + self.delta)

    @property
    def lam2(self) -> float:
        return 0.5 * (abs(self.mu) - self.mu + self.delta)


def log_bessel_i(order: int, arg: float) -> float:
    """ln I_|order|(arg) for integer order (I is even in the order).

    arg=0 returns 0 for order 0 and -inf otherwise; arg < 0 is a domain error.
    """
    if arg < 0.0:
        raise ValueError(f"argument must be nonnegative, got {arg}")
    return _log_bessel_i(int(order), float(arg))


def log_pmf(y, params: ZiSkellamParams):
    """Log probability mass at integer y (scalar or array)."""
    ys = np.asarray(y)
    if ys.ndim == 0:
        return _log_pmf(int(ys), params.mu, params.delta, params.pi)
    return _log_pmf_batch(ys.astype(np.int64).ravel(), params.mu, params.delta,
                          params.pi).reshape(ys.shape)


def moments(params: ZiSkellamParams) -> tuple[float, float]:
    """Mean and variance of the zero-inflated distribution."""
    mean = (1.0 - params.pi) * params.mu
    var = (1.0 - params.pi) * (abs(params.mu) + params.delta
                               + params.pi * params.mu ** 2)
    return mean, var


def score_logdelta(y: int, params: ZiSkellamParams) -> float:
    """Gradient of the log PMF with respect to ln(delta)."""
    return _score_logdelta(int(y), params.mu, params.delta, params.pi)


def score_mu(y: int, params: ZiSkellamParams) -> float:
    """Gradient of the log PMF with respect to mu.

    At mu = 0 the derivative is the symmetric average of the two one-sided
    limits, which works out to y / delta.
    """
    return _score_mu(int(y), params.mu, params.delta, params.pi)


def score_logit_pi(y: int, params: ZiSkellamParams) -> float:
    """Gradient of the log PMF with respect to logit(pi); requires 0 < pi < 1."""
    if not 0.0 < params.pi < 1.0:
        raise ValueError(f"logit score needs 0 < pi < 1, got {params.pi}")
    return _score_logit_pi(int(y), params.mu, params.delta, params.pi)


def sample(params: ZiSkellamParams, rng: np.random.Generator, size=None):
    """Draw from the distribution: 0 with probability pi, else a Poisson difference."""
    if size is None:
        if rng.random() < params.pi:
            return 0
        return int(rng.poisson(params.lam1) - rng.poisson(params.lam2))
    keep = rng.random(size) >= params.pi
    draws = rng.poisson(params.lam1, size=size) - rng.poisson(params.lam2, size=size)
    return np.where(keep, draws, 0)
