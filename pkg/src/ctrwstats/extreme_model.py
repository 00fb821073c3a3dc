"""
Weibull model of excessive return magnitudes and the mean interevent time.

Losses are handled as positive magnitudes; the sign convention lives in
:mod:`ctrwstats.events`.  Time is measured in ticks of the input series, so
the time unit is 1 and the mean interevent time at threshold Q is

    R_Q = calib * exp((Q / eps_bar) ** eta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special_fns import gamma_complete

LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class WeibullParams:
    """Shape ``eta``, scale ``eps_bar`` and the R_Q calibration constant ``calib``."""

    eta: float
    eps_bar: float
    calib: float = 1.0

    def __post_init__(self):
        for name in ("eta", "eps_bar", "calib"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")

    @property
    def heavy_tailed(self) -> bool:
        """True in the eta < 1 regime (stretched-exponential tail)."""
        return self.eta < 1.0

    def to_dict(self) -> dict:
        return {"eta": self.eta, "eps_bar": self.eps_bar, "calib": self.calib}

    @classmethod
    def from_dict(cls, d: dict) -> "WeibullParams":
        return cls(float(d["eta"]), float(d["eps_bar"]), float(d.get("calib", 1.0)))


@dataclass(frozen=True)
class ThresholdPoint:
    """One point of an R_Q curve.

    ``n_events``, ``reliable`` and ``stderr`` are only filled for empirical
    curves.
    """

    q: float
    r_q: float
    n_events: int | None = None
    reliable: bool = True
    stderr: float | None = None
    r_q_quantile: float | None = None


def _nonneg(eps, name="eps"):
    arr = np.asarray(eps, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"{name} must be finite and >= 0")
    return arr


def weibull_pdf(p: WeibullParams, eps):
    """Weibull density of the magnitude ``eps``.

    For eta < 1 the density diverges at the origin and ``math.inf`` is
    returned there; for eta == 1 the origin value is ``1/eps_bar``.
    """
    z = _nonneg(eps) / p.eps_bar
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (p.eta / p.eps_bar) * z ** (p.eta - 1.0) * np.exp(-(z**p.eta))
    if p.eta < 1.0:
        out = np.where(z == 0, np.inf, out)
    elif p.eta > 1.0:
        out = np.where(z == 0, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def weibull_survival(p: WeibullParams, eps):
    """P(magnitude >= eps)."""
    z = _nonneg(eps) / p.eps_bar
    out = np.exp(-(z**p.eta))
    return float(out) if np.ndim(out) == 0 else out


def weibull_moments(p: WeibullParams) -> tuple[float, float]:
    """Relative mean <eps>/eps_bar and relative variance sigma^2/<eps>^2.

    Both depend on eta only.
    """
    g1 = gamma_complete(1.0 / p.eta)
    g2 = gamma_complete(2.0 / p.eta)
    return g1 / p.eta, 2.0 * p.eta * g2 / (g1 * g1) - 1.0


def log_rq_of_q(p: WeibullParams, q):
    """ln R_Q; never overflows."""
    z = _nonneg(q, "q") / p.eps_bar
    out = math.log(p.calib) + z**p.eta
    return float(out) if np.ndim(out) == 0 else out


def rq_of_q(p: WeibullParams, q):
    """Mean interevent time R_Q at threshold ``q``.

    Raises
    ------
    OverflowError
        If R_Q is not representable; use :func:`log_rq_of_q` instead.
    """
    u = (_nonneg(q, "q") / p.eps_bar) ** p.eta
    if np.any(math.log(p.calib) + u > LOG_MAX):
        raise OverflowError("R_Q overflows; request log_rq_of_q instead")
    out = p.calib * np.exp(u)
    return float(out) if np.ndim(out) == 0 else out


def q_of_rq(p: WeibullParams, r_q):
    """Threshold giving mean interevent time ``r_q`` (inverse of :func:`rq_of_q`)."""
    r = np.asarray(r_q, dtype=float)
    ratio = r / p.calib
    if np.any(~np.isfinite(r)) or np.any(ratio < 1.0 - 4 * np.finfo(float).eps):
        raise ValueError("r_q must be finite and >= calib")
    out = p.eps_bar * np.log(np.maximum(ratio, 1.0)) ** (1.0 / p.eta)
    return float(out) if np.ndim(out) == 0 else out


def _excess(p: WeibullParams, q, u):
    z = np.asarray(q, dtype=float) / p.eps_bar
    return p.eps_bar * (z**p.eta - np.log(u)) ** (1.0 / p.eta)


def sample_excess(p: WeibullParams, q, u):
    """Draw a magnitude from the Weibull law conditioned on ``eps >= q``.

    Deterministic inverse-CDF transform of the uniform draw ``u`` in (0, 1);
    ``u -> 1`` maps to ``q``.
    """
    q = _nonneg(q, "q")
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr > 0)) or np.any(~(u_arr < 1)):
        raise ValueError("u must lie in the open interval (0, 1)")
    out = np.maximum(_excess(p, q, u_arr), q)
    return float(out) if np.ndim(out) == 0 else out


def sample_weibull(p: WeibullParams, u):
    """Unconditional Weibull draw from ``u`` in (0, 1)."""
    return sample_excess(p, 0.0, u)
