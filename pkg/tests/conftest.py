import math

import numpy as np
import pytest


def skellam_pmf_bruteforce(y: int, lam1: float, lam2: float, kmax: int = 200) -> float:
    """Truncated double sum P(P1 - P2 = y) for independent Poissons.

    Independent of the package's Bessel-based path: plain Poisson products
    accumulated in linear space.
    """
    total = 0.0
    for k in range(kmax + 1):
        j = k + y
        if j < 0:
            continue
        lp1 = j * math.log(lam1) - lam1 - math.lgamma(j + 1) if lam1 > 0 else (0.0 if j == 0 else -math.inf)
        lp2 = k * math.log(lam2) - lam2 - math.lgamma(k + 1) if lam2 > 0 else (0.0 if k == 0 else -math.inf)
        total += math.exp(lp1 + lp2)
    return total


def zi_skellam_pmf_bruteforce(y: int, mu: float, delta: float, pi: float, kmax: int = 200) -> float:
    lam1 = 0.5 * (abs(mu) + mu + delta)
    lam2 = 0.5 * (abs(mu) - mu + delta)
    base = skellam_pmf_bruteforce(y, lam1, lam2, kmax)
    return (pi if y == 0 else 0.0) + (1.0 - pi) * base


@pytest.fixture(scope="session")
def param_grid():
    """The mu/delta/pi grid used by the distribution-level checks."""
    mus = list(range(-5, 6))
    deltas = [0.1, 1.0, 5.0, 20.0]
    pis = [0.0, 0.2, 0.5]
    return [(float(m), d, p) for m in mus for d in deltas for p in pis]
