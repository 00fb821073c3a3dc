"""
Parameter estimation from R_Q curves, interevent histograms and derived tables.

Every nonlinear fit is seeded by a linearized solution, refined with a
Nelder-Mead simplex and polished with Levenberg-Marquardt; a step is kept
only if it lowers the objective, so the recorded objective history never
increases.  Standard errors come from the Gauss-Newton approximation
``s^2 (J^T J)^-1`` at the optimum.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize, minimize_scalar

from .events import Histogram
from .extreme_model import ThresholdPoint, WeibullParams
from .superstat import (
    EXPONENTIAL_ALPHA,
    Direction,
    ScalingLaw,
    SuperstatParams,
    bin_average,
    bq_from_alpha,
    density,
    tau0_from_tauq,
)

ALPHA_CAP = 1000.0


class FitError(ValueError):
    """Input cannot support the requested fit."""


@dataclass
class FitReport:
    params: dict[str, float]
    stderr: dict[str, float]
    objective: float
    n_points: int
    converged: bool
    covariance: np.ndarray | None = None
    notes: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    value: object = None
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None or not math.isfinite(v) else float(v)

        cov = None
        if self.covariance is not None:
            cov = [[num(v) for v in row] for row in np.asarray(self.covariance)]
        return {
            "params": {k: num(v) for k, v in self.params.items()},
            "stderr": {k: num(v) for k, v in self.stderr.items()},
            "objective": num(self.objective),
            "n_points": self.n_points,
            "converged": bool(self.converged),
            "notes": list(self.notes),
            "flags": list(self.flags),
            "covariance": cov,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Two lines ``tau_Q(Q) = a_s * R_Q + b_s`` joined at ``breakpoint``."""

    a_l: float
    b_l: float
    a_r: float
    b_r: float
    breakpoint: float

    def __call__(self, r_q):
        r = np.asarray(r_q, dtype=float)
        out = np.where(r <= self.breakpoint, self.a_l * r + self.b_l, self.a_r * r + self.b_r)
        return float(out) if out.ndim == 0 else out

    @property
    def tau0_at_unit_rq(self) -> float:
        """Left line at R_Q = 1, i.e. ``a_l + b_l``."""
        return self.a_l + self.b_l


# shared machinery


def _gauss_newton_cov(resid: Callable, theta: np.ndarray, n: int):
    """Jacobian by central differences and the covariance ``s^2 (J^T J)^-1``."""
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    jac = np.empty((n, p))
    for j in range(p):
        h = 1e-6 * max(abs(theta[j]), 1e-8)
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        jac[:, j] = (resid(up) - resid(dn)) / (2 * h)
    r = resid(theta)
    dof = n - p
    try:
        inv = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return np.full((p, p), math.nan)
    if dof <= 0:
        return np.full((p, p), math.nan)
    return inv * float(r @ r) / dof


def _refine(resid: Callable, theta0, clip: Callable | None = None, xatol=1e-12, fatol=1e-18):
    """Nelder-Mead then Levenberg-Marquardt on ``sum(resid**2)``.

    Returns ``(theta, objective, converged, history)``.
    """
    clip = clip or (lambda t: t)

    def obj(t):
        r = resid(clip(t))
        v = float(r @ r)
        return v if math.isfinite(v) else math.inf

    theta = np.asarray(theta0, dtype=float)
    best = obj(theta)
    history = [best]
    # an absolute tolerance below the objective's ulp would never be met
    fatol = max(fatol, 1e-14 * best) if math.isfinite(best) else fatol

    def record(xk):
        history.append(min(history[-1], obj(xk)))

    nm = minimize(
        obj,
        theta,
        method="Nelder-Mead",
        callback=record,
        options={"xatol": xatol, "fatol": fatol, "maxiter": 20000, "maxfev": 40000, "adaptive": theta.size > 2},
    )
    converged = bool(nm.success)
    if nm.fun <= best:
        theta, best = np.asarray(nm.x, dtype=float), float(nm.fun)
    try:
        lm = least_squares(lambda t: resid(clip(t)), theta, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        val = obj(lm.x)
        if val <= best:
            theta, best = np.asarray(lm.x, dtype=float), val
            converged = converged or bool(lm.success)
    except (ValueError, FloatingPointError):
        pass
    history.append(min(history[-1], best))
    return clip(theta), best, converged, history


def _stderr_map(names, cov):
    return {k: (math.sqrt(cov[i, i]) if math.isfinite(cov[i, i]) and cov[i, i] >= 0 else math.nan) for i, k in enumerate(names)}


# R_Q curve


def _rq_arrays(points):
    if len(points) and isinstance(points[0], ThresholdPoint):
        q = np.array([p.q for p in points], dtype=float)
        r = np.array([p.r_q for p in points], dtype=float)
    else:
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise FitError("points must be ThresholdPoints or (q, r_q) pairs")
        q, r = arr[:, 0], arr[:, 1]
    return q, r


def fit_rq_curve(points, weights=None, fit_calib: bool = True) -> FitReport:
    """Fit ``R_Q = calib * exp((Q/eps_bar)**eta)`` to ``(Q, R_Q)`` points.

    Seeded by least squares of ``ln ln R_Q`` on ``ln Q`` (calib = 1), then
    refined on ``ln R_Q``.  Two points are interpolated exactly with calib
    fixed at 1 and flagged ``under_determined``.
    """
    q, r = _rq_arrays(points)
    ok = np.isfinite(q) & np.isfinite(r)
    if not np.all(ok):
        raise FitError("R_Q points must be finite")
    if np.any(q <= 0) or np.any(r <= 1):
        raise FitError("R_Q fit needs q > 0 and r_q > 1")
    n = len(q)
    if n < 2:
        raise FitError("at least two points are required")
    if len(np.unique(q)) < 2:
        raise FitError("degenerate input: all thresholds coincide")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0):
        raise FitError("weights must be non-negative, one per point")
    sw = np.sqrt(w)
    flags, notes = [], []

    x, y = np.log(q), np.log(np.log(r))
    slope, icpt = np.polyfit(x, y, 1, w=sw)
    if slope <= 0:
        raise FitError("R_Q does not increase with Q; cannot seed the fit")
    eta0, eps0 = slope, math.exp(-icpt / slope)
    lr = np.log(r)

    if n == 2 or not fit_calib:
        names = ["eta", "eps_bar"]
        if n == 2:
            flags.append("under_determined")
            notes.append("two points: exact interpolation with calib fixed at 1")

        def resid(t):
            return sw * (lr - (q / math.exp(t[1])) ** t[0])

        theta0 = np.array([eta0, math.log(eps0)])
    else:
        names = ["eta", "eps_bar", "calib"]

        def resid(t):
            return sw * (lr - t[2] - (q / math.exp(t[1])) ** t[0])

        theta0 = np.array([eta0, math.log(eps0), 0.0])
        if n == 3:
            flags.append("exactly_determined")

    theta, best, converged, hist = _refine(resid, theta0)
    eta, eps_bar = float(theta[0]), math.exp(theta[1])
    calib = math.exp(theta[2]) if len(names) == 3 else 1.0

    def resid_nat(t):
        c = math.log(t[2]) if len(t) == 3 else 0.0
        return sw * (lr - c - (q / t[1]) ** t[0])

    nat = np.array([eta, eps_bar, calib][: len(names)])
    cov = _gauss_newton_cov(resid_nat, nat, n)
    if best <= 1e-28:
        cov = np.zeros_like(cov)
    stderr = _stderr_map(names, cov)
    if len(names) == 2:
        stderr["calib"] = 0.0
    if eta >= 1.0:
        flags.append("eta_ge_1")
        notes.append("eta >= 1: outside the stretched-exponential regime")
    return FitReport(
        params={"eta": eta, "eps_bar": eps_bar, "calib": calib},
        stderr=stderr,
        objective=best,
        n_points=n,
        converged=converged,
        covariance=cov,
        notes=notes,
        flags=flags,
        value=WeibullParams(eta, eps_bar, calib),
        history=hist,
    )


# interevent density


def _seed_alpha_tau(model, y, w, t_lo, t_hi, alpha_cap):
    best = (math.inf, None, None)
    for a in (0.25, 0.5, 1.0, 2.0, 4.0, 10.0, alpha_cap):

        def prof(lt, a=a):
            m = model(a, math.exp(lt))
            with np.errstate(divide="ignore"):
                rr = np.sqrt(w) * (y - np.log(m))
            v = float(rr @ rr)
            return v if math.isfinite(v) else 1e300

        res = minimize_scalar(prof, bounds=(math.log(t_lo) - 3, math.log(t_hi) + 3), method="bounded")
        if res.fun < best[0]:
            best = (res.fun, a, math.exp(res.x))
    return best[1], best[2]


def _fit_density(model, y, w, t_lo, t_hi, direction, alpha_cap, n_points) -> FitReport:
    log_cap = math.log(alpha_cap)

    def clip(t):
        return np.array([min(t[0], log_cap), t[1]])

    def resid(t):
        m = model(math.exp(t[0]), math.exp(t[1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            rr = np.sqrt(w) * (y - np.log(m))
        return np.where(np.isfinite(rr), rr, 1e150)

    a0, t0 = _seed_alpha_tau(model, y, w, t_lo, t_hi, alpha_cap)
    theta, best, converged, hist = _refine(resid, np.log([a0, t0]), clip=clip, xatol=1e-13)
    alpha, tau = math.exp(theta[0]), math.exp(theta[1])
    flags, notes = [], []
    if alpha > EXPONENTIAL_ALPHA:
        alpha = alpha_cap
        flags.append("alpha_capped")
        notes.append(f"alpha clamped at {alpha_cap:g}: no power-law signature, density is exponential")

        def prof(lt):
            rr = resid(np.array([log_cap, lt]))
            return float(rr @ rr)

        res = minimize_scalar(prof, bracket=(theta[1] - 0.1, theta[1] + 0.1), tol=1e-12)
        if res.fun <= best:
            tau, best = math.exp(res.x), float(res.fun)
        hist.append(min(hist[-1], best))

    def resid_nat(t):
        return resid(np.log(t))

    if "alpha_capped" in flags:
        cov1 = _gauss_newton_cov(lambda t: resid_nat(np.array([alpha, t[0]])), np.array([tau]), n_points)
        cov = np.array([[math.nan, math.nan], [math.nan, cov1[0, 0]]])
    else:
        cov = _gauss_newton_cov(resid_nat, np.array([alpha, tau]), n_points)
    if best <= 1e-28:
        cov = np.where(np.isfinite(cov), 0.0, cov)
    return FitReport(
        params={"alpha": alpha, "tau_q": tau},
        stderr=_stderr_map(["alpha", "tau_q"], cov),
        objective=best,
        n_points=n_points,
        converged=converged,
        covariance=cov,
        notes=notes,
        flags=flags,
        value=SuperstatParams(alpha, tau, direction),
        history=hist,
    )


def fit_psi(
    h: Histogram,
    direction=Direction.EXPANDING,
    alpha_cap: float = ALPHA_CAP,
    model: str = "bin_average",
) -> FitReport:
    """Fit ``(alpha, tau_q)`` to an interevent histogram.

    Weighted least squares of log density, weights equal to bin counts; empty
    bins carry no information and are dropped.  ``model="bin_average"``
    compares each bin with the model's exact average over the bin;
    ``model="center"`` evaluates the density at the bin center instead.
    Fitted ``alpha`` beyond the exponential regime is clamped to
    ``alpha_cap`` and flagged.
    """
    direction = Direction(direction)
    keep = (h.counts > 0) & (h.densities > 0)
    n = int(keep.sum())
    if n < 4:
        raise FitError(f"histogram has {n} informative bins; at least 4 are needed")
    lo, hi = h.edges[:-1][keep], h.edges[1:][keep]
    y = np.log(h.densities[keep])
    w = h.counts[keep].astype(float)
    if model == "bin_average":
        lo_c = np.maximum(lo, 0.0)

        def f(a, t):
            return np.asarray(bin_average(SuperstatParams(a, t, direction), lo_c, hi))

    elif model == "center":
        c = h.centers[keep]

        def f(a, t):
            return np.asarray(density(SuperstatParams(a, t, direction), c))

    else:
        raise ValueError(f"unknown model {model!r}")
    rep = _fit_density(f, y, w, max(lo[0], hi[0] * 1e-3), hi[-1], direction, alpha_cap, n)
    rep.notes.append(f"{model} model, {n} informative bins")
    return rep


def fit_psi_points(dt, dens, weights=None, direction=Direction.EXPANDING, alpha_cap: float = ALPHA_CAP) -> FitReport:
    """Fit ``(alpha, tau_q)`` to density values sampled at ``dt``."""
    direction = Direction(direction)
    dt = np.asarray(dt, dtype=float)
    dens = np.asarray(dens, dtype=float)
    keep = (dens > 0) & np.isfinite(dens) & (dt > 0)
    n = int(keep.sum())
    if n < 4:
        raise FitError("at least 4 positive density values are needed")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)[keep]
    x = dt[keep]

    def f(a, t):
        return np.asarray(density(SuperstatParams(a, t, direction), x))

    return _fit_density(f, np.log(dens[keep]), w, x.min(), x.max(), direction, alpha_cap, n)


# superscaling and tau calibration


def fit_superscaling(points: Sequence, alpha_cap: float = ALPHA_CAP) -> FitReport:
    """Fit ``1/alpha = B * ln(R_Q)**zeta`` to ``(r_q, alpha)`` pairs.

    Seeded by the straight-line fit of ``ln(1/alpha)`` on ``ln ln R_Q`` and
    refined by least squares on ``1/alpha`` itself.  Pairs at or above
    ``alpha_cap`` are sentinels and are left out.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FitError("points must be (r_q, alpha) pairs")
    if np.any(~np.isfinite(arr)):
        raise FitError("points must be finite")
    notes = []
    sentinel = arr[:, 1] >= alpha_cap
    if np.any(sentinel):
        notes.append(f"excluded {int(sentinel.sum())} capped alpha value(s)")
        arr = arr[~sentinel]
    if np.any(arr[:, 0] <= 1):
        raise FitError("superscaling needs r_q > 1")
    if np.any(arr[:, 1] <= 0):
        raise FitError("alpha must be > 0")
    if len(arr) < 3:
        raise FitError("at least three non-sentinel points are required")
    arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
    lnr, inv_a = np.log(arr[:, 0]), 1.0 / arr[:, 1]
    n = len(arr)
    zeta0, lnb0 = np.polyfit(np.log(lnr), np.log(inv_a), 1)

    def resid(t):
        return inv_a - math.exp(t[0]) * lnr ** t[1]

    theta, best, converged, hist = _refine(resid, np.array([lnb0, zeta0]))
    b, zeta = math.exp(theta[0]), float(theta[1])

    def resid_nat(t):
        return inv_a - t[0] * lnr ** t[1]

    cov = _gauss_newton_cov(resid_nat, np.array([b, zeta]), n)
    if best <= 1e-28:
        cov = np.zeros_like(cov)
    flags = []
    if zeta <= 0:
        flags.append("non_positive_zeta")
    value = ScalingLaw(b, zeta) if zeta > 0 and b > 0 else None
    return FitReport(
        params={"b": b, "zeta": zeta},
        stderr=_stderr_map(["b", "zeta"], cov),
        objective=best,
        n_points=n,
        converged=converged,
        covariance=cov,
        notes=notes,
        flags=flags,
        value=value,
        history=hist,
    )


def _ols(x, y):
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    a = float(((x - xm) * (y - ym)).sum() / sxx)
    b = float(ym - a * xm)
    res = y - (a * x + b)
    ssr = float(res @ res)
    if n > 2:
        s2 = ssr / (n - 2)
        cov = s2 * np.array([[1 / sxx, -xm / sxx], [-xm / sxx, 1 / n + xm * xm / sxx]])
    else:
        cov = np.full((2, 2), math.nan)
    return a, b, ssr, cov


def fit_piecewise_tau(points: Sequence, share_breakpoint: bool = True) -> FitReport:
    """Two straight lines ``tau_Q(Q) = a_s * R_Q + b_s`` with a scanned breakpoint.

    Every interior split is tried and the one with the smallest total squared
    residual wins.  With ``share_breakpoint`` the sample at the split belongs
    to both lines (a broken line through a common vertex); otherwise the two
    sides are disjoint.  Each side needs at least two points.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FitError("points must be (r_q, tau_q) pairs")
    if len(arr) < 4:
        raise FitError("at least four points are required")
    arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
    x, y = arr[:, 0], arr[:, 1]
    n = len(x)
    splits = []
    for k in range(1, n - 1):
        left = slice(0, k + 1) if share_breakpoint else slice(0, k)
        right = slice(k, n)
        if len(x[left]) < 2 or len(x[right]) < 2:
            continue
        if np.ptp(x[left]) == 0 or np.ptp(x[right]) == 0:
            continue
        fl, fr = _ols(x[left], y[left]), _ols(x[right], y[right])
        splits.append((fl[2] + fr[2], k, fl, fr))
    if not splits:
        raise FitError("no split leaves two distinct points on each side")
    total, k, (a_l, b_l, _, cov_l), (a_r, b_r, _, cov_r) = min(splits, key=lambda s: (s[0], s[1]))

    flags, notes = [], []
    a_all, b_all, ssr_all, _ = _ols(x, y)
    scale = float(((y - y.mean()) ** 2).sum())
    if ssr_all <= 1e-20 * max(scale, 1e-300):
        flags.append("collinear")
        notes.append("points are collinear: both segments coincide and the breakpoint is arbitrary")
    if a_l != a_r:
        cross = (b_r - b_l) / (a_l - a_r)
    else:
        cross = math.nan
    lo_k = x[k - 1] if share_breakpoint else x[k - 1]
    hi_k = x[k + 1] if share_breakpoint and k + 1 < n else x[k]
    bp = cross if math.isfinite(cross) and lo_k <= cross <= hi_k else float(x[k])
    pw = PiecewiseLinear(a_l, b_l, a_r, b_r, bp)
    cov = np.zeros((4, 4))
    cov[:2, :2] = cov_l
    cov[2:, 2:] = cov_r
    names = ["a_l", "b_l", "a_r", "b_r"]
    stderr = _stderr_map(names, cov)
    return FitReport(
        params={"a_l": a_l, "b_l": b_l, "a_r": a_r, "b_r": b_r, "breakpoint": bp, "tau0_at_unit_rq": pw.tau0_at_unit_rq},
        stderr=stderr,
        objective=total,
        n_points=n,
        converged=True,
        covariance=cov,
        notes=notes + [f"split at sample {k} (R_Q = {x[k]:g})"],
        flags=flags,
        value=pw,
        history=[total],
    )


def derive_elementary(sp: SuperstatParams, r_q: float, p: WeibullParams) -> tuple[float, float]:
    """``(B_Q, tau_Q(0))`` from the fitted ``(alpha, tau_Q(Q))`` at ``r_q``."""
    return bq_from_alpha(sp.alpha, p.eps_bar, p.eta), tau0_from_tauq(sp.tau_q, r_q, sp.alpha, sp.direction)


def bootstrap_stderr(fit: Callable[[np.ndarray], FitReport], points, n_boot: int = 200, seed: int = 0) -> dict[str, float]:
    """Bootstrap standard errors: refit on resampled points, report the spread."""
    arr = np.asarray(points, dtype=float)
    rng = np.random.default_rng(seed)
    draws: dict[str, list[float]] = {}
    for _ in range(n_boot):
        idx = rng.integers(0, len(arr), len(arr))
        try:
            rep = fit(arr[idx])
        except (FitError, ValueError, FloatingPointError):
            continue
        for k, v in rep.params.items():
            draws.setdefault(k, []).append(v)
    return {k: float(np.std(v, ddof=1)) if len(v) > 1 else math.nan for k, v in draws.items()}
