from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctrwstats.estimation import (
    ALPHA_CAP,
    FitError,
    PiecewiseLinear,
    bootstrap_stderr,
    derive_elementary,
    fit_piecewise_tau,
    fit_psi,
    fit_psi_points,
    fit_rq_curve,
    fit_superscaling,
)
from ctrwstats.events import Histogram, histogram
from ctrwstats.extreme_model import ThresholdPoint, WeibullParams, q_of_rq, rq_of_q
from ctrwstats.superstat import (
    Direction,
    ScalingLaw,
    SuperstatParams,
    alpha_from_bq,
    alpha_from_scaling,
    bin_average,
    density,
    psi,
    psi_exponential,
    tau0_from_tauq,
)

IBM = WeibullParams(0.8246, 0.0078)
ALPHA_PAIRS = [(5, 3.0), (10, 1.90), (30, 0.95), (70, 0.47)]
TAU_PAIRS = [(2, 1.4286), (5, 3.33), (10, 5.0), (30, 4.55), (70, 3.85)]


def monotone(hist):
    return all(b <= a for a, b in zip(hist, hist[1:]))


class TestRqFit:
    def test_noiseless(self):
        p = WeibullParams(0.8246, 0.0078, 1.7)
        q = np.linspace(0.003, 0.05, 12)
        rep = fit_rq_curve([ThresholdPoint(x, rq_of_q(p, x)) for x in q])
        assert rep.params["eta"] == pytest.approx(0.8246, rel=1e-8)
        assert rep.params["eps_bar"] == pytest.approx(0.0078, rel=1e-8)
        assert rep.params["calib"] == pytest.approx(1.7, rel=1e-8)
        assert rep.converged and monotone(rep.history)
        assert isinstance(rep.value, WeibullParams)

    def test_fixed_calib(self):
        q = np.linspace(0.003, 0.05, 8)
        rep = fit_rq_curve(np.c_[q, rq_of_q(IBM, q)], fit_calib=False)
        assert rep.params["calib"] == 1.0 and rep.stderr["calib"] == 0.0
        assert rep.params["eta"] == pytest.approx(0.8246, rel=1e-9)

    def test_two_points(self):
        q = [0.01, 0.04]
        rep = fit_rq_curve(np.c_[q, rq_of_q(IBM, np.array(q))])
        assert "under_determined" in rep.flags
        assert rep.params["eta"] == pytest.approx(0.8246, rel=1e-8)

    def test_three_points_flagged(self):
        q = np.array([0.01, 0.02, 0.04])
        assert "exactly_determined" in fit_rq_curve(np.c_[q, rq_of_q(IBM, q)]).flags

    def test_eta_ge_1(self):
        p = WeibullParams(1.3, 0.01)
        q = np.linspace(0.005, 0.03, 6)
        assert "eta_ge_1" in fit_rq_curve(np.c_[q, rq_of_q(p, q)]).flags

    def test_noise_stderr_order(self):
        rng = np.random.default_rng(3)
        q = np.linspace(0.003, 0.05, 30)
        r = rq_of_q(IBM, q) * np.exp(rng.normal(0, 0.02, q.size))
        rep = fit_rq_curve(np.c_[q, r])
        for k in ("eta", "eps_bar", "calib"):
            assert 0 < rep.stderr[k] < 0.2 * rep.params[k]
        assert monotone(rep.history)

    @pytest.mark.parametrize(
        "pts",
        [
            [(0.01, 2.0)],
            [(0.01, 2.0), (0.01, 3.0), (0.01, 4.0)],
            [(0.01, 0.5), (0.02, 3.0), (0.03, 4.0)],
            [(-0.01, 2.0), (0.02, 3.0), (0.03, 4.0)],
            [(0.01, math.nan), (0.02, 3.0), (0.03, 4.0)],
            [(0.01, 4.0), (0.02, 3.0), (0.03, 2.0)],
        ],
    )
    def test_rejects(self, pts):
        with pytest.raises(FitError):
            fit_rq_curve(pts)

    def test_json(self):
        q = np.linspace(0.003, 0.05, 5)
        d = json.loads(fit_rq_curve(np.c_[q, rq_of_q(IBM, q)]).to_json())
        assert {"params", "stderr", "objective", "n_points", "converged", "notes", "flags", "covariance"} <= set(d)


class TestPsiFit:
    @pytest.mark.parametrize("direction", list(Direction))
    def test_noiseless_points(self, direction):
        sp = SuperstatParams(1.9, 5.0, direction)
        dt = np.geomspace(0.05, 200, 40)
        rep = fit_psi_points(dt, density(sp, dt), direction=direction)
        assert rep.params["alpha"] == pytest.approx(1.9, rel=1e-6)
        assert rep.params["tau_q"] == pytest.approx(5.0, rel=1e-6)
        assert monotone(rep.history)

    def test_noiseless_histogram(self):
        sp = SuperstatParams(0.95, 4.55)
        edges = np.geomspace(0.01, 1e4, 41)
        dens = np.asarray(bin_average(sp, edges[:-1], edges[1:]))
        h = Histogram(edges, np.full(40, 100), dens, "logarithmic")
        rep = fit_psi(h)
        assert rep.params["alpha"] == pytest.approx(0.95, rel=1e-6)
        assert rep.params["tau_q"] == pytest.approx(4.55, rel=1e-6)

    def test_exponential_capped(self):
        dt = np.linspace(0.1, 8, 30)
        rep = fit_psi_points(dt, psi_exponential(SuperstatParams(ALPHA_CAP, 1.4286), dt))
        assert rep.params["alpha"] == ALPHA_CAP
        assert "alpha_capped" in rep.flags
        assert rep.params["tau_q"] == pytest.approx(1.4286, rel=1e-3)
        assert math.isnan(rep.stderr["alpha"])

    def test_center_model(self):
        sp = SuperstatParams(1.9, 5.0)
        edges = np.geomspace(0.1, 500, 31)
        c = np.sqrt(edges[:-1] * edges[1:])
        h = Histogram(edges, np.full(30, 10), np.asarray(psi(sp, c)), "logarithmic")
        rep = fit_psi(h, model="center")
        assert rep.params["alpha"] == pytest.approx(1.9, rel=1e-6)
        with pytest.raises(ValueError):
            fit_psi(h, model="median")

    def test_too_few_bins(self):
        h = histogram(np.array([1.0, 2.0, 3.0]), "log", 3)
        with pytest.raises(FitError):
            fit_psi(h)
        with pytest.raises(FitError):
            fit_psi_points([1, 2, 3], [0.1, 0.2, 0.0])


class TestSuperscaling:
    def test_noiseless(self):
        law = ScalingLaw(0.04798, 2.6096)
        pts = [(r, alpha_from_scaling(law, r)) for r in (2, 5, 10, 30, 70, 150)]
        rep = fit_superscaling(pts)
        assert rep.params["b"] == pytest.approx(0.04798, rel=1e-10)
        assert rep.params["zeta"] == pytest.approx(2.6096, rel=1e-10)
        assert isinstance(rep.value, ScalingLaw)

    def test_sentinel_excluded(self):
        rep = fit_superscaling([(2, ALPHA_CAP)] + ALPHA_PAIRS)
        assert rep.n_points == 4 and rep.notes

    def test_rejects(self):
        with pytest.raises(FitError):
            fit_superscaling(ALPHA_PAIRS[:2] + [(2, ALPHA_CAP)])
        with pytest.raises(FitError):
            fit_superscaling([(1.0, 3.0)] + ALPHA_PAIRS)
        with pytest.raises(FitError):
            fit_superscaling([(3.0, -1.0)] + ALPHA_PAIRS)

    def test_decreasing_inverse_alpha(self):
        rep = fit_superscaling([(5, 0.5), (10, 1.0), (30, 2.0), (70, 3.0)])
        assert "non_positive_zeta" in rep.flags and rep.value is None

    def test_stderr(self):
        rep = fit_superscaling(ALPHA_PAIRS)
        assert all(0 < rep.stderr[k] < math.inf for k in ("b", "zeta"))
        assert monotone(rep.history)


@settings(max_examples=50, deadline=None)
@given(perm=st.permutations(range(5)))
def test_superscaling_order_invariant(perm):
    pts = [(2, 20.0)] + ALPHA_PAIRS
    a = fit_superscaling(pts)
    b = fit_superscaling([pts[i] for i in perm])
    assert a.params == b.params


@settings(max_examples=50, deadline=None)
@given(perm=st.permutations(range(5)))
def test_piecewise_order_invariant(perm):
    a = fit_piecewise_tau(TAU_PAIRS)
    b = fit_piecewise_tau([TAU_PAIRS[i] for i in perm])
    assert a.params == b.params


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(0.1, 10.0))
def test_piecewise_scale_equivariant(scale):
    a = fit_piecewise_tau(TAU_PAIRS)
    b = fit_piecewise_tau([(r, scale * t) for r, t in TAU_PAIRS])
    for k in ("a_l", "b_l", "a_r", "b_r"):
        assert b.params[k] == pytest.approx(scale * a.params[k], rel=1e-9, abs=1e-12)
    assert b.params["breakpoint"] == pytest.approx(a.params["breakpoint"], rel=1e-9)


class TestPiecewise:
    def test_exact_broken_line(self):
        pw = PiecewiseLinear(0.5, 1.0, -0.1, 7.0, 10.0)
        x = np.array([1, 3, 5, 10, 20, 40, 80], dtype=float)
        rep = fit_piecewise_tau(np.c_[x, pw(x)])
        for k, v in (("a_l", 0.5), ("b_l", 1.0), ("a_r", -0.1), ("b_r", 7.0), ("breakpoint", 10.0)):
            assert rep.params[k] == pytest.approx(v, rel=1e-9)
        assert rep.objective == pytest.approx(0.0, abs=1e-20)

    def test_collinear(self):
        x = np.arange(1.0, 8.0)
        rep = fit_piecewise_tau(np.c_[x, 2 * x + 1])
        assert "collinear" in rep.flags
        assert rep.params["a_l"] == pytest.approx(2.0) and rep.params["a_r"] == pytest.approx(2.0)

    def test_disjoint_option(self):
        rep = fit_piecewise_tau(TAU_PAIRS + [(100, 3.3)], share_breakpoint=False)
        assert rep.n_points == 6

    def test_rejects(self):
        with pytest.raises(FitError):
            fit_piecewise_tau(TAU_PAIRS[:3])
        with pytest.raises(FitError):
            fit_piecewise_tau([(1, 1), (1, 2), (1, 3), (1, 4)])

    def test_unit_rq(self):
        rep = fit_piecewise_tau(TAU_PAIRS)
        assert rep.params["tau0_at_unit_rq"] == pytest.approx(rep.params["a_l"] + rep.params["b_l"])
        assert rep.value(1.0) == pytest.approx(rep.params["tau0_at_unit_rq"])


class TestDerived:
    @settings(max_examples=100, deadline=None)
    @given(alpha=st.floats(0.2, 20.0), tau=st.floats(0.1, 50.0), r_q=st.floats(1.5, 200.0))
    def test_roundtrip(self, alpha, tau, r_q):
        bq, tau0 = derive_elementary(SuperstatParams(alpha, tau), r_q, IBM)
        assert alpha_from_bq(bq, IBM.eps_bar, IBM.eta) == pytest.approx(alpha, rel=1e-10)
        assert tau0_from_tauq(tau0, r_q, alpha, Direction.CLUSTERING) == pytest.approx(tau, rel=1e-9)

    def test_known_row(self):
        bq, tau0 = derive_elementary(SuperstatParams(1.9, 5.0), 10.0, IBM)
        assert bq == pytest.approx(58.86516, rel=1e-6)
        assert tau0 == pytest.approx(1.48793, rel=5e-4)

    def test_bootstrap(self):
        se = bootstrap_stderr(fit_superscaling, [(2, 20.0), (3, 8.0)] + ALPHA_PAIRS, n_boot=60, seed=1)
        assert se["b"] > 0 and se["zeta"] > 0
        assert se == bootstrap_stderr(fit_superscaling, [(2, 20.0), (3, 8.0)] + ALPHA_PAIRS, n_boot=60, seed=1)


def test_q_grid_helper_consistent():
    # the fitted curve inverts back onto the sampled thresholds
    q = np.linspace(0.003, 0.05, 10)
    rep = fit_rq_curve(np.c_[q, rq_of_q(IBM, q)])
    np.testing.assert_allclose(q_of_rq(rep.value, rq_of_q(IBM, q)), q, rtol=1e-7)
