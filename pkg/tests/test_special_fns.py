from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ctrwstats.special_fns import (
    DomainError,
    gamma_complete,
    log_gamma,
    lower_incomplete_gamma,
    scaled_lower_gamma,
    scaled_upper_gamma,
    upper_gamma_any,
    upper_incomplete_gamma,
)

# mpmath at 50 digits
FROZEN = [
    # a, x, upper, lower
    (0.5, 0.1, 1.1604624847937442, 0.6119913661117718),
    (2.5, 3.0, 0.407069175871303, 0.92227121230783402),
    (10.0, 30.0, 2.5843409530985166, 362877.4156590469),
    (100.0, 90.0, 7.8560049319377413e155, 1.476616612456674e155),
]
FROZEN_CONTINUED = [(-1.5, 2.0, 0.011832994103345997), (-2.0, 0.5, 0.88641745710071383)]

A_GRID = [0.1, 0.47, 1.0, 1.9, 3.0, 10.0]
X_GRID = [0.0, 0.01, 1.0, 10.0, 100.0]


class TestComplete:
    def test_factorials(self):
        assert gamma_complete(1.0) == 1.0
        assert gamma_complete(5.0) == pytest.approx(24.0, rel=1e-15)

    def test_against_quadrature(self):
        ref, _ = quad(lambda t: t**1.9 * math.exp(-t), 0, np.inf, epsabs=0, epsrel=1e-13)
        assert gamma_complete(2.9) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("a", [1e-3, 0.3, 7.5, 99.1, 170.0])
    def test_range(self, a):
        assert gamma_complete(a) == pytest.approx(float(mp.gamma(a)), rel=1e-12)
        assert log_gamma(a) == pytest.approx(float(mp.loggamma(a)), rel=1e-12, abs=1e-14)

    def test_overflow_and_domain(self):
        with pytest.raises(OverflowError):
            gamma_complete(200.0)
        for bad in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(DomainError):
                gamma_complete(bad)

    def test_array(self):
        out = gamma_complete([1.0, 2.0, 3.0])
        np.testing.assert_allclose(out, [1.0, 1.0, 2.0], rtol=1e-15)


class TestIncomplete:
    def test_closed_forms(self):
        assert lower_incomplete_gamma(1.0, 2.0) == pytest.approx(1 - math.exp(-2), rel=1e-14)
        assert upper_incomplete_gamma(1.0, 2.0) == pytest.approx(math.exp(-2), rel=1e-14)
        assert lower_incomplete_gamma(2.9, 0.0) == 0.0
        assert upper_incomplete_gamma(2.9, 0.0) == pytest.approx(gamma_complete(2.9), rel=1e-14)

    def test_lower_quadrature_oracle(self):
        ref, _ = quad(lambda y: y**1.9 * math.exp(-y), 0, 1.3, epsabs=0, epsrel=1e-13)
        assert lower_incomplete_gamma(2.9, 1.3) == pytest.approx(ref, rel=1e-10)

    def test_upper_quadrature_oracle(self):
        # the integrand beyond y = 904 contributes less than e**-900
        ref, _ = quad(lambda y: y**-0.5 * math.exp(-y), 4.0, 904.0, epsabs=0, epsrel=1e-13, limit=200)
        assert upper_incomplete_gamma(0.5, 4.0) == pytest.approx(ref, rel=1e-10)

    @pytest.mark.parametrize("a,x,upper,lower", FROZEN)
    def test_frozen(self, a, x, upper, lower):
        assert upper_incomplete_gamma(a, x) == pytest.approx(upper, rel=1e-12)
        assert lower_incomplete_gamma(a, x) == pytest.approx(lower, rel=1e-12)

    @pytest.mark.parametrize("a,x,ref", FROZEN_CONTINUED)
    def test_continued_to_negative_shape(self, a, x, ref):
        assert upper_gamma_any(a, x) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("a", A_GRID)
    @pytest.mark.parametrize("x", X_GRID)
    def test_complementarity(self, a, x):
        g = gamma_complete(a)
        assert abs(lower_incomplete_gamma(a, x) + upper_incomplete_gamma(a, x) - g) <= 1e-10 * g

    @pytest.mark.parametrize("a", A_GRID)
    def test_recurrence(self, a):
        for x in X_GRID[1:]:
            lhs = lower_incomplete_gamma(a + 1, x)
            rhs = a * lower_incomplete_gamma(a, x) - x**a * math.exp(-x)
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-300)

    @pytest.mark.parametrize("a", A_GRID)
    def test_small_x(self, a):
        x = 1e-8
        assert lower_incomplete_gamma(a, x) / x**a == pytest.approx(1 / a, rel=1e-7)
        assert scaled_lower_gamma(a, 0.0) == pytest.approx(1 / a, rel=1e-15)

    def test_monotone(self):
        x = np.linspace(0, 60, 400)
        for a in A_GRID:
            lo = lower_incomplete_gamma(a, x)
            up = upper_incomplete_gamma(a, x)
            assert np.all(np.diff(lo) >= 0)
            assert np.all(np.diff(up) <= 0)

    def test_large_shape_finite(self):
        # shape 1001 would overflow without log-space prefactors
        val = scaled_lower_gamma(1001.0, 3.0)
        assert val == pytest.approx(math.exp(-3.0) * float(mp.hyp1f1(1, 1002, 3)) / 1001, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            lower_incomplete_gamma(0.0, 1.0)
        with pytest.raises(DomainError):
            upper_incomplete_gamma(1.0, -1.0)
        with pytest.raises(DomainError):
            lower_incomplete_gamma(1.0, math.nan)
        with pytest.raises(DomainError):
            scaled_upper_gamma(-0.5, 0.0)

    def test_scalar_in_float_out(self):
        assert isinstance(lower_incomplete_gamma(2.0, 1.0), float)
        assert lower_incomplete_gamma([2.0], [1.0]).shape == (1,)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.05, 60.0), x=st.floats(1e-6, 300.0))
def test_against_mpmath(a, x):
    mp.mp.dps = 30
    up = float(mp.gammainc(a, x, mp.inf))
    lo = float(mp.gammainc(a, 0, x))
    if up > 1e-290:
        assert upper_incomplete_gamma(a, x) == pytest.approx(up, rel=1e-10)
    if lo > 1e-290:
        assert lower_incomplete_gamma(a, x) == pytest.approx(lo, rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    a=st.one_of(st.floats(-6.0, 4.0), st.sampled_from([0.0, -1.0, -3.0, 1e-28, -1e-12, -2.0 + 1e-9])),
    x=st.floats(1e-3, 60.0),
)
def test_scaled_upper_any_shape(a, x):
    mp.mp.dps = 30
    ref = float(mp.gammainc(a, x, mp.inf) * mp.mpf(x) ** (-a))
    assert scaled_upper_gamma(a, x) == pytest.approx(ref, rel=1e-10)
