import math

import mpmath
import numpy as np
import pytest

from tickvol.skellam import log_bessel_i


def log_bessel_oracle(nu: int, x: float) -> float:
    """High-precision ln I_nu(x) via mpmath."""
    with mpmath.workdps(60):
        return float(mpmath.log(mpmath.besseli(abs(nu), x)))


def test_zero_argument():
    assert log_bessel_i(0, 0.0) == 0.0
    assert log_bessel_i(3, 0.0) == -math.inf
    assert log_bessel_i(-2, 0.0) == -math.inf


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        log_bessel_i(0, -1.0)


def test_power_series_reference_values():
    # Sum (x/2)^(2k) / (k!)^2 at x=2, 30 terms -> I_0(2) = 2.2795853...
    s0 = sum((1.0) ** (2 * k) / math.factorial(k) ** 2 for k in range(30))
    assert log_bessel_i(0, 2.0) == pytest.approx(math.log(s0), abs=1e-12)
    # I_1(2) = 1.5906368...
    s1 = sum(1.0 ** (2 * k + 1) / (math.factorial(k) * math.factorial(k + 1))
             for k in range(30))
    assert log_bessel_i(1, 2.0) == pytest.approx(math.log(s1), abs=1e-12)
    assert math.exp(log_bessel_i(0, 2.0)) == pytest.approx(2.2795853, abs=1e-6)
    assert math.exp(log_bessel_i(1, 2.0)) == pytest.approx(1.5906368, abs=1e-6)


def test_even_in_order():
    assert log_bessel_i(-4, 3.7) == log_bessel_i(4, 3.7)


@pytest.mark.parametrize("nu", [0, 1, 2, 5, 10, 50, 150, 300])
@pytest.mark.parametrize("x", [1e-8, 0.1, 1.0, 5.0, 20.0, 29.9, 30.1, 60.0,
                               150.0, 600.0, 2000.0])
def test_against_mpmath_grid(nu, x):
    got = log_bessel_i(nu, x)
    want = log_bessel_oracle(nu, x)
    assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_large_order_small_argument_stays_finite():
    # I_300(2) underflows in linear space but its log is representable.
    v = log_bessel_i(300, 2.0)
    assert math.isfinite(v)
    assert v == pytest.approx(log_bessel_oracle(300, 2.0), rel=1e-10)


def test_series_vs_miller_agree_at_threshold():
    # Both evaluation regimes must hit the oracle right where they meet.
    for nu in (0, 1, 3, 17):
        for x in (29.999999, 30.000001):
            assert log_bessel_i(nu, x) == pytest.approx(
                log_bessel_oracle(nu, x), rel=1e-10)
