from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import kstest

from ctrwstats.extreme_model import (
    ThresholdPoint,
    WeibullParams,
    log_rq_of_q,
    q_of_rq,
    rq_of_q,
    sample_excess,
    sample_weibull,
    weibull_moments,
    weibull_pdf,
    weibull_survival,
)
from ctrwstats.quadrature import rq_from_quadrature

IBM = WeibullParams(0.8246, 0.0078)
SP500 = WeibullParams(0.6981, 0.0035)

params = st.builds(
    WeibullParams,
    eta=st.floats(0.3, 2.0),
    eps_bar=st.floats(1e-4, 1.0),
    calib=st.floats(0.5, 2.0),
)


class TestParams:
    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            WeibullParams(bad, 1.0)
        with pytest.raises(ValueError):
            WeibullParams(1.0, bad)
        with pytest.raises(ValueError):
            WeibullParams(1.0, 1.0, bad)

    def test_roundtrip_and_regime(self):
        assert WeibullParams.from_dict(IBM.to_dict()) == IBM
        assert IBM.heavy_tailed
        assert not WeibullParams(1.2, 1.0).heavy_tailed

    def test_threshold_point_defaults(self):
        pt = ThresholdPoint(0.01, 3.0)
        assert pt.reliable and pt.n_events is None


class TestDensity:
    def test_exponential_origin(self):
        assert weibull_pdf(WeibullParams(1.0, 1.0), 0.0) == 1.0

    def test_at_scale(self):
        assert weibull_pdf(IBM, 0.0078) == pytest.approx(0.8246 / 0.0078 * math.exp(-1), rel=1e-14)

    def test_divergent_origin(self):
        assert weibull_pdf(IBM, 0.0) == math.inf

    def test_normalized(self):
        val = quad(lambda e: weibull_pdf(SP500, e), 0, 0.0035, epsabs=0, epsrel=1e-12)[0]
        val += quad(lambda e: weibull_pdf(SP500, e), 0.0035, np.inf, epsabs=0, epsrel=1e-12)[0]
        assert val == pytest.approx(1.0, rel=1e-9)

    def test_domain(self):
        with pytest.raises(ValueError):
            weibull_pdf(IBM, -1e-3)

    def test_tail_dominated_by_stretched_exponential(self):
        # in u = (eps/eps_bar)**eta the log density has slope -1 - (1-eta)/(eta u)
        u = np.linspace(5, 50, 200)
        eps = IBM.eps_bar * u ** (1 / IBM.eta)
        slope = np.diff(np.log(weibull_pdf(IBM, eps))) / np.diff(u)
        dev = np.abs(slope + 1)
        assert dev.max() < 0.05
        assert np.all(np.diff(dev) < 0)


class TestMoments:
    def test_exponential(self):
        m, v = weibull_moments(WeibullParams(1.0, 3.0))
        assert (m, v) == pytest.approx((1.0, 1.0), rel=1e-14)

    def test_half(self):
        m, v = weibull_moments(WeibullParams(0.5, 1.0))
        assert (m, v) == pytest.approx((2.0, 5.0), rel=1e-14)

    def test_quadrature(self):
        f = lambda e, k: e**k * weibull_pdf(IBM, e)
        m1 = sum(quad(f, lo, hi, args=(1,), epsabs=0, epsrel=1e-12)[0] for lo, hi in ((0, 0.0078), (0.0078, np.inf)))
        m2 = sum(quad(f, lo, hi, args=(2,), epsabs=0, epsrel=1e-12)[0] for lo, hi in ((0, 0.0078), (0.0078, np.inf)))
        mean, rvar = weibull_moments(IBM)
        assert mean == pytest.approx(m1 / IBM.eps_bar, rel=1e-9)
        assert rvar == pytest.approx((m2 - m1 * m1) / (m1 * m1), rel=1e-8)


class TestRq:
    def test_zero(self):
        assert rq_of_q(IBM, 0.0) == 1.0
        assert q_of_rq(IBM, 1.0) == 0.0

    @pytest.mark.parametrize("q,r", [(0.02145, 10.0), (0.04508, 70.0)])
    def test_table_rows(self, q, r):
        assert rq_of_q(IBM, q) == pytest.approx(r, rel=2e-3)
        assert q_of_rq(IBM, r) == pytest.approx(q, rel=1e-3)

    def test_frozen(self):
        # mpmath at 50 digits
        assert rq_of_q(IBM, 0.005) == pytest.approx(1.9997574238488841, rel=1e-14)
        assert rq_of_q(IBM, 0.04508) == pytest.approx(70.012864593710548, rel=1e-14)

    def test_overflow(self):
        with pytest.raises(OverflowError):
            rq_of_q(IBM, 100.0)
        assert log_rq_of_q(IBM, 100.0) > 700

    def test_domain(self):
        with pytest.raises(ValueError):
            q_of_rq(WeibullParams(1.0, 1.0, 2.0), 1.5)

    @pytest.mark.parametrize("q", [0.0, 0.003, 0.02145, 0.06])
    def test_quantile_identity(self, q):
        p = WeibullParams(0.8246, 0.0078, 1.3)
        assert rq_from_quadrature(p, q) == pytest.approx(rq_of_q(p, q), rel=1e-8)


@settings(max_examples=300, deadline=None)
@given(p=params, u=st.one_of(st.just(0.0), st.floats(1e-6, 700.0)))
def test_inverse_consistency(p, u):
    q = p.eps_bar * u ** (1 / p.eta)
    if u == 0:
        assert q_of_rq(p, rq_of_q(p, q)) == 0.0
        return
    # rounding R_Q to double costs about ulp/(eta*u) in relative q
    tol = 4e-16 * (1 + 1 / u) / p.eta + 1e-14
    assert q_of_rq(p, rq_of_q(p, q)) == pytest.approx(q, rel=tol)


class TestSampler:
    def test_boundary(self):
        assert sample_excess(IBM, 0.02, 1 - 1e-16) == pytest.approx(0.02, rel=1e-12)

    def test_exponential_inverse(self):
        assert sample_excess(WeibullParams(1.0, 1.0), 0.0, math.exp(-2)) == pytest.approx(2.0, rel=1e-15)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, math.nan])
    def test_domain(self, u):
        with pytest.raises(ValueError):
            sample_excess(IBM, 0.01, u)

    def test_ks(self):
        q = 0.02145
        u = np.random.default_rng(11).uniform(size=100_000)
        u = u[u > 0]
        eps = sample_excess(IBM, q, u)
        assert eps.min() >= q
        cdf = lambda e: 1 - weibull_survival(IBM, e) / weibull_survival(IBM, q)
        assert kstest(eps, cdf).statistic < 0.006

    def test_unconditional(self):
        u = np.random.default_rng(2).uniform(size=50_000)
        assert kstest(sample_weibull(IBM, u), lambda e: 1 - weibull_survival(IBM, e)).statistic < 0.008


@settings(max_examples=200, deadline=None)
@given(p=params, z=st.floats(0.0, 10.0), u=st.floats(1e-300, 1.0, exclude_max=True))
def test_excess_never_below_threshold(p, z, u):
    q = p.eps_bar * z
    assert sample_excess(p, q, u) >= q
