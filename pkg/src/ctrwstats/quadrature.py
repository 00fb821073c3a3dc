"""
Brute-force quadrature routes used to cross-check the closed forms.

``superposition`` integrates the exponential waiting-time law over the
Weibull magnitudes directly in ``eps``; it never touches the incomplete gamma
functions.  ``density_moment`` integrates a density on log-spaced panels and
closes the heavy tail analytically.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .extreme_model import WeibullParams, weibull_pdf
from .special_fns import gamma_complete, upper_incomplete_gamma
from .superstat import (
    EXPONENTIAL_ALPHA,
    Direction,
    RelaxationSpec,
    SuperstatParams,
    density,
)

QUAD_RTOL = 1e-12


def superposition(r: RelaxationSpec, p: WeibullParams, q: float, dt: float, normalized: bool = True) -> float:
    """``int_q^inf exp(-dt/tau(eps)) / tau(eps) * D(eps) deps`` by adaptive quadrature.

    With ``normalized`` the integral is divided by ``P(eps >= q)``, i.e.
    multiplied by R_Q of the uncalibrated Weibull law.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    u_q = (q / p.eps_bar) ** p.eta
    # D(eps) beyond u_q + 60 carries < e**-60 of the conditional mass
    e_max = p.eps_bar * (u_q + 60.0) ** (1.0 / p.eta)

    sign = 1.0 if r.direction is Direction.EXPANDING else -1.0
    eta, scale, c = p.eta, p.eps_bar, p.eta / p.eps_bar

    def integrand(e):
        tau = r.tau0 * math.exp(sign * (r.b_q * e) ** r.eta)
        z = e / scale
        return math.exp(-dt / tau) / tau * c * z ** (eta - 1.0) * math.exp(-(z**eta))

    pts = [p.eps_bar * (u_q + k) ** (1.0 / p.eta) for k in (0.5, 2.0, 5.0, 15.0, 30.0)]
    if dt > 0:
        # magnitude at which tau(eps) == dt is where the integrand peaks
        ratio = math.log(dt / r.tau0) if r.direction is Direction.EXPANDING else math.log(r.tau0 / dt)
        if ratio > 0:
            pts.append(ratio ** (1.0 / r.eta) / r.b_q)
    pts = sorted(x for x in pts if q < x < e_max)
    edges = [q, *pts, e_max]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = quad(integrand, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=500)
        total += val
    if normalized:
        total *= math.exp(u_q)
    return total


def density_moment(sp: SuperstatParams, m: int = 0) -> float:
    """``int_0^inf dt**m * density(sp, dt) d dt`` by quadrature with analytic tail closure.

    Expanding densities need ``alpha > m``; beyond the cut-off ``X`` (in units
    of tau_q) the lower incomplete gamma equals its complete value to double
    precision, so the tail integral is the power-law one.
    """
    a, tau = sp.alpha, sp.tau_q
    expanding = sp.direction is Direction.EXPANDING
    if expanding and a <= m and a <= EXPONENTIAL_ALPHA:
        raise ValueError("moment diverges for alpha <= m")
    cut = 40.0 + 2.0 * (1.0 + a) if a <= EXPONENTIAL_ALPHA else 800.0
    if expanding and a <= EXPONENTIAL_ALPHA:
        g = gamma_complete(1.0 + a)
        while upper_incomplete_gamma(1.0 + a, cut) > 1e-18 * g:
            cut *= 1.5
    edges = np.concatenate([[0.0], np.logspace(-8, math.log10(cut), 40)]) * tau

    def f(t):
        return t**m * density(sp, t)

    body = sum(
        quad(f, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)[0] for lo, hi in zip(edges[:-1], edges[1:])
    )
    x = cut
    if expanding and a <= EXPONENTIAL_ALPHA:
        tail = tau**m * a * gamma_complete(1.0 + a) * x ** (m - a) / (a - m)
    else:
        tail = quad(f, cut * tau, np.inf, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)[0]
    return body + tail


def rq_from_quadrature(p: WeibullParams, q: float) -> float:
    """``calib / int_q^inf D(eps) deps`` by quadrature."""
    u_q = (q / p.eps_bar) ** p.eta
    e_max = p.eps_bar * (u_q + 60.0) ** (1.0 / p.eta)
    # integrate the tail mass relative to exp(-u_q) to keep precision for large q
    val, _ = quad(
        lambda e: weibull_pdf(p, e) * math.exp(u_q), q, e_max, epsabs=0.0, epsrel=QUAD_RTOL, limit=500
    )
    return p.calib * math.exp(u_q) / val
