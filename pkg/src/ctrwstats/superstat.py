"""
Closed-form interevent-time superstatistics of the CTRW valley model.

The waiting time after an excess of magnitude ``eps >= Q`` is exponential with
mean ``tau(eps) = tau0 * exp(+-(B_Q * eps) ** eta)``.  Averaging over the
conditional Weibull law of ``eps`` gives, with ``x = dt / tau_Q(Q)`` and
``alpha = (B_Q * eps_bar) ** -eta``,

expanding hierarchy (``+``)::

    psi(dt) = (alpha / tau_Q) * x**-(1+alpha) * gamma(1+alpha, x)

clustering hierarchy (``-``)::

    psi'(dt) = (alpha / tau'_Q) * x**(alpha-1) * Gamma(1-alpha, x)

Both are normalized conditional densities (unit mass).  The raw superposition
over the unconditional Weibull density is these divided by R_Q; see
:func:`psi_unconditional`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .extreme_model import LOG_MAX, WeibullParams
from .special_fns import DomainError, log_gamma, scaled_lower_gamma, scaled_upper_gamma

# Above this shape exponent the expanding density is replaced by its
# alpha-independent exponential limit (fits cap alpha at 1000 as a sentinel).
EXPONENTIAL_ALPHA = 500.0


class Direction(str, Enum):
    EXPANDING = "expanding"
    CLUSTERING = "clustering"


def _positive(name, v):
    if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
        raise ValueError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class RelaxationSpec:
    """Relaxation-time law ``tau(eps) = tau0 * exp(+-(b_q * eps) ** eta)``."""

    tau0: float
    b_q: float
    eta: float
    direction: Direction = Direction.EXPANDING

    def __post_init__(self):
        for name in ("tau0", "b_q", "eta"):
            _positive(name, getattr(self, name))
        object.__setattr__(self, "direction", Direction(self.direction))

    def to_dict(self) -> dict:
        return {"tau0": self.tau0, "b_q": self.b_q, "eta": self.eta, "direction": self.direction.value}

    @classmethod
    def from_dict(cls, d: dict) -> "RelaxationSpec":
        return cls(float(d["tau0"]), float(d["b_q"]), float(d["eta"]), d.get("direction", "expanding"))


@dataclass(frozen=True)
class SuperstatParams:
    """Shape exponent ``alpha``, characteristic time ``tau_q`` and hierarchy direction.

    ``weight`` is the share of the expanding component when two parameter sets
    are mixed.
    """

    alpha: float
    tau_q: float
    direction: Direction = Direction.EXPANDING
    weight: float = 1.0

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _positive("tau_q", self.tau_q)
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError(f"weight must lie in [0, 1], got {self.weight!r}")
        object.__setattr__(self, "direction", Direction(self.direction))

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "tau_q": self.tau_q, "direction": self.direction.value, "weight": self.weight}

    @classmethod
    def from_dict(cls, d: dict) -> "SuperstatParams":
        return cls(
            float(d["alpha"]),
            float(d["tau_q"]),
            d.get("direction", "expanding"),
            float(d.get("weight", 1.0)),
        )


@dataclass(frozen=True)
class ScalingLaw:
    """Superscaling ``1/alpha = b * ln(R_Q) ** zeta``."""

    b: float
    zeta: float

    def __post_init__(self):
        _positive("b", self.b)
        _positive("zeta", self.zeta)

    def to_dict(self) -> dict:
        return {"b": self.b, "zeta": self.zeta}


class Moment(NamedTuple):
    """Moment of order ``order``; ``value`` is None when the moment diverges."""

    order: int
    value: float | None
    finite: bool


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


def _dt(dt, strictly_positive=False):
    arr = np.asarray(dt, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("dt must be finite and >= 0")
    if strictly_positive and np.any(arr == 0):
        raise DomainError("dt must be > 0")
    return arr


def _expect(sp: SuperstatParams, direction: Direction):
    if sp.direction is not direction:
        raise ValueError(f"expected {direction.value} parameters, got {sp.direction.value}")


# relaxation-time law and parameter chain


def relaxation_time(r: RelaxationSpec, eps):
    """Mean waiting time after an excess of magnitude ``eps``."""
    e = np.asarray(eps, dtype=float)
    if np.any(~np.isfinite(e)) or np.any(e < 0):
        raise ValueError("eps must be finite and >= 0")
    expo = (r.b_q * e) ** r.eta
    if r.direction is Direction.EXPANDING:
        if np.any(expo + math.log(r.tau0) > LOG_MAX):
            raise OverflowError("relaxation time overflows")
        out = r.tau0 * np.exp(expo)
    else:
        with np.errstate(under="ignore"):
            out = r.tau0 * np.exp(-expo)
    return _ret(out)


def alpha_from_bq(b_q: float, eps_bar: float, eta: float) -> float:
    """Shape exponent ``alpha = (b_q * eps_bar) ** -eta``."""
    for name, v in (("b_q", b_q), ("eps_bar", eps_bar), ("eta", eta)):
        _positive(name, v)
    return (b_q * eps_bar) ** (-eta)


def bq_from_alpha(alpha: float, eps_bar: float, eta: float) -> float:
    """Inverse of :func:`alpha_from_bq`."""
    for name, v in (("alpha", alpha), ("eps_bar", eps_bar), ("eta", eta)):
        _positive(name, v)
    return alpha ** (-1.0 / eta) / eps_bar


def superstat_from_relaxation(r: RelaxationSpec, p: WeibullParams, q: float) -> SuperstatParams:
    """Shape exponent and characteristic time implied by a relaxation law at threshold ``q``."""
    return SuperstatParams(alpha_from_bq(r.b_q, p.eps_bar, r.eta), relaxation_time(r, q), r.direction)


def relaxation_from_superstat(sp: SuperstatParams, p: WeibullParams, r_q: float) -> RelaxationSpec:
    """Relaxation law reproducing ``sp`` at mean interevent time ``r_q`` (calib taken as 1)."""
    return RelaxationSpec(
        tau0_from_tauq(sp.tau_q, r_q, sp.alpha, sp.direction),
        bq_from_alpha(sp.alpha, p.eps_bar, p.eta),
        p.eta,
        sp.direction,
    )


def rq_from_tau_ratios(tau_q_at_q: float, tau_q_at_epsbar: float, tau0: float) -> float:
    """R_Q from ``ln R_Q = ln(tau(Q)/tau0) / ln(tau(eps_bar)/tau0)``."""
    for name, v in (("tau_q_at_q", tau_q_at_q), ("tau_q_at_epsbar", tau_q_at_epsbar), ("tau0", tau0)):
        _positive(name, v)
    den = math.log(tau_q_at_epsbar / tau0)
    if den == 0.0:
        raise DomainError("tau(eps_bar) equals tau0; the ratio is undefined")
    return math.exp(math.log(tau_q_at_q / tau0) / den)


def tau0_from_tauq(tau_q: float, r_q: float, alpha: float, direction=Direction.EXPANDING) -> float:
    """Free relaxation time from ``tau_Q(Q) / tau0 = R_Q ** (+-1/alpha)``.

    Underflow to zero is possible for small alpha and is reported with a
    RuntimeWarning.
    """
    _positive("tau_q", tau_q)
    _positive("r_q", r_q)
    _positive("alpha", alpha)
    sign = -1.0 if Direction(direction) is Direction.EXPANDING else 1.0
    expo = sign * math.log(r_q) / alpha
    if math.log(tau_q) + expo > LOG_MAX:
        raise OverflowError("tau0 overflows")
    with np.errstate(under="ignore"):
        out = float(tau_q * np.exp(expo)) if expo < LOG_MAX else math.exp(math.log(tau_q) + expo)
    if out == 0.0:
        warnings.warn("tau0 underflows to 0", RuntimeWarning, stacklevel=2)
    return out


def scaling_bq(law: ScalingLaw, p: WeibullParams, q: float) -> float:
    """``B_Q = B**(1/eta) * Q**zeta / eps_bar**(1+zeta)``."""
    _positive("q", q)
    return law.b ** (1.0 / p.eta) * q**law.zeta / p.eps_bar ** (1.0 + law.zeta)


def scaling_bq_from_rq(law: ScalingLaw, p: WeibullParams, r_q: float) -> float:
    """Same law written in ``ln R_Q``: ``B**(1/eta) / eps_bar * ln(R_Q)**(zeta/eta)``."""
    if not r_q > 1.0:
        raise DomainError("r_q must be > 1")
    return law.b ** (1.0 / p.eta) / p.eps_bar * math.log(r_q) ** (law.zeta / p.eta)


def alpha_from_scaling(law: ScalingLaw, r_q: float) -> float:
    """``alpha = 1 / (B * ln(R_Q)**zeta)``."""
    if not r_q > 1.0:
        raise DomainError("r_q must be > 1")
    return 1.0 / (law.b * math.log(r_q) ** law.zeta)


def log_tauq_ratio_from_scaling(law: ScalingLaw, r_q: float) -> float:
    """``ln(tau_Q(Q)/tau0) = B * ln(R_Q)**(1+zeta)``."""
    if not r_q > 1.0:
        raise DomainError("r_q must be > 1")
    return law.b * math.log(r_q) ** (1.0 + law.zeta)


def tauq_ratio_from_scaling(law: ScalingLaw, r_q: float) -> float:
    lr = log_tauq_ratio_from_scaling(law, r_q)
    if lr > LOG_MAX:
        raise OverflowError("tau ratio overflows; use log_tauq_ratio_from_scaling")
    return math.exp(lr)


# densities


def psi(sp: SuperstatParams, dt, exact: bool = False):
    """Normalized interevent density for the expanding hierarchy.

    ``dt = 0`` returns the finite limit ``alpha / (tau_q (1 + alpha))``.  For
    ``alpha > EXPONENTIAL_ALPHA`` the exponential limit is returned unless
    ``exact`` is set, in which case the full expression is evaluated (it is
    overflow-free for any alpha).
    """
    _expect(sp, Direction.EXPANDING)
    x = _dt(dt) / sp.tau_q
    if sp.alpha > EXPONENTIAL_ALPHA and not exact:
        return _ret(np.exp(-x) / sp.tau_q)
    return _ret(sp.alpha / sp.tau_q * scaled_lower_gamma(1.0 + sp.alpha, x))


def psi_tail(sp: SuperstatParams, dt):
    """Power-law asymptote ``(alpha/tau) x**-(1+alpha) Gamma(1+alpha)`` for ``x >> 1``."""
    x = _dt(dt, strictly_positive=True) / sp.tau_q
    a = sp.alpha
    return _ret(np.exp(math.log(a / sp.tau_q) + log_gamma(1.0 + a) - (1.0 + a) * np.log(x)))


def psi_initial(sp: SuperstatParams, dt):
    """Short-time exponential ``(alpha/(1+alpha)/tau) exp(-(1+alpha)/(2+alpha) x)``."""
    x = _dt(dt) / sp.tau_q
    a = sp.alpha
    return _ret(a / (1.0 + a) / sp.tau_q * np.exp(-(1.0 + a) / (2.0 + a) * x))


def psi_exponential(sp: SuperstatParams, dt):
    """Large-alpha limit ``exp(-x) / tau``."""
    x = _dt(dt) / sp.tau_q
    return _ret(np.exp(-x) / sp.tau_q)


def psi_clustering(sp: SuperstatParams, dt, compat: bool = False, exact: bool = False):
    """Normalized interevent density for the clustering hierarchy.

    The default form ``(alpha/tau') x**(alpha-1) Gamma(1-alpha, x)`` is what the
    superposition integral evaluates to; it behaves as a power law
    ``x**(alpha-1)`` for small x (alpha < 1), tends to ``alpha/((alpha-1) tau')``
    for alpha > 1, and is truncated by ``exp(-x)/x`` for large x.

    ``compat=True`` evaluates the alternative form
    ``(alpha/tau') x**-(1+alpha) Gamma(1+alpha, x)`` instead.  That expression
    is not a normalizable density and does not match the superposition; it is
    kept for comparison only.
    """
    _expect(sp, Direction.CLUSTERING)
    t = _dt(dt)
    a = sp.alpha
    if a > EXPONENTIAL_ALPHA and not exact and not compat:
        return _ret(np.exp(-t / sp.tau_q) / sp.tau_q)
    if np.any(t == 0):
        if compat or a <= 1.0:
            raise DomainError("clustering density diverges at dt = 0 for this alpha")
    x = np.atleast_1d(t / sp.tau_q)
    out = np.empty_like(x)
    pos = x > 0
    shape = 1.0 + a if compat else 1.0 - a
    if np.any(pos):
        out[pos] = a / sp.tau_q * scaled_upper_gamma(shape, x[pos])
    if not np.all(pos):
        out[~pos] = a / ((a - 1.0) * sp.tau_q)
    return _ret(out.reshape(t.shape))


def density(sp: SuperstatParams, dt, exact: bool = False):
    """Dispatch to :func:`psi` or :func:`psi_clustering` by ``sp.direction``."""
    if sp.direction is Direction.EXPANDING:
        return psi(sp, dt, exact=exact)
    return psi_clustering(sp, dt, exact=exact)


def psi_unconditional(sp: SuperstatParams, r_q: float, dt):
    """Raw superposition over the unconditional Weibull law (mass ``1/r_q``)."""
    _positive("r_q", r_q)
    return _ret(np.asarray(density(sp, dt)) / r_q)


def psi_mixture(sp_exp: SuperstatParams, sp_clu: SuperstatParams, w: float, dt, compat: bool = False):
    """Pointwise ``w * psi + (1 - w) * psi'``."""
    if not (0.0 <= w <= 1.0):
        raise ValueError("w must lie in [0, 1]")
    if w == 1.0:
        return psi(sp_exp, dt)
    if w == 0.0:
        return psi_clustering(sp_clu, dt, compat=compat)
    return _ret(w * np.asarray(psi(sp_exp, dt)) + (1.0 - w) * np.asarray(psi_clustering(sp_clu, dt, compat=compat)))


def psi_cdf(sp: SuperstatParams, dt):
    """Distribution function of the interevent time, in closed form.

    Expanding: ``1 - exp(-x) - x**-alpha * gamma(1+alpha, x)``.
    Clustering: ``1 - alpha * x**alpha * Gamma(-alpha, x)``.
    """
    t = _dt(dt)
    x = np.atleast_1d(t / sp.tau_q)
    a = sp.alpha
    if a > EXPONENTIAL_ALPHA:
        out = -np.expm1(-x)
    elif sp.direction is Direction.EXPANDING:
        out = -np.expm1(-x) - x * scaled_lower_gamma(1.0 + a, x)
    else:
        out = np.zeros_like(x)
        pos = x > 0
        if np.any(pos):
            out[pos] = 1.0 - a * scaled_upper_gamma(-a, x[pos])
    out = np.clip(out, 0.0, 1.0)
    return _ret(out.reshape(t.shape))


def psi_survival(sp: SuperstatParams, dt):
    """``P(interevent time > dt)``, accurate in the far tail.

    Expanding: ``exp(-x) + x**-alpha * gamma(1+alpha, x)``.
    Clustering: ``alpha * x**alpha * Gamma(-alpha, x)``.
    """
    t = _dt(dt)
    x = np.atleast_1d(t / sp.tau_q)
    a = sp.alpha
    if a > EXPONENTIAL_ALPHA:
        out = np.exp(-x)
    elif sp.direction is Direction.EXPANDING:
        out = np.exp(-x) + x * scaled_lower_gamma(1.0 + a, x)
    else:
        out = np.ones_like(x)
        pos = x > 0
        if np.any(pos):
            out[pos] = a * scaled_upper_gamma(-a, x[pos])
    out = np.clip(out, 0.0, 1.0)
    return _ret(out.reshape(t.shape))


def bin_average(sp: SuperstatParams, lo, hi):
    """Mean density over ``[lo, hi]``, from the distribution function.

    Bins below ``tau_q`` difference the CDF, the rest difference the survival
    function, so neither end loses precision to cancellation.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise ValueError("bin edges must satisfy lo < hi")
    head = np.asarray(psi_cdf(sp, hi)) - np.asarray(psi_cdf(sp, lo))
    tail = np.asarray(psi_survival(sp, lo)) - np.asarray(psi_survival(sp, hi))
    mass = np.where(hi <= sp.tau_q, head, tail)
    return _ret(mass / (hi - lo))


# moments


def moment(sp: SuperstatParams, r_q: float, m: int, conditional: bool = False) -> Moment:
    """Interevent-time moment of integer order ``m``.

    By default returns ``R_Q * tau_q**m * m! / (1 - m/alpha)``, the convention
    in which the zeroth moment equals R_Q.  ``conditional=True`` drops the R_Q
    factor and gives the moment of the unit-mass density.  Orders with
    ``alpha <= m`` return ``Moment(m, None, False)``.

    For the clustering hierarchy every moment is finite:
    ``tau'_q**m * m! / (1 + m/alpha)``.
    """
    if int(m) != m or m < 0:
        raise ValueError("m must be a non-negative integer")
    m = int(m)
    _positive("r_q", r_q)
    a = sp.alpha
    if sp.direction is Direction.EXPANDING:
        if a <= m:
            return Moment(m, None, False)
        core = sp.tau_q**m * math.factorial(m) / (1.0 - m / a)
    else:
        core = sp.tau_q**m * math.factorial(m) / (1.0 + m / a)
    return Moment(m, core if conditional else r_q * core, True)
