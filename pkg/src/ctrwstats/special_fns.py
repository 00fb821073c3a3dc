"""
Gamma-family special functions.

Complete gamma, lower and upper incomplete gamma, and the "scaled" variants
``x**-a * gamma(a, x)`` / ``x**-a * Gamma(a, x)`` that the interevent densities
are built from.  The incomplete functions use the classic split: power series
for ``x < a + 1`` and a modified-Lentz continued fraction for ``x >= a + 1``
(Numerical Recipes, ch. 6.2).  Prefactors are assembled in log space so that
shape arguments in the thousands stay finite.

All functions accept scalars or array-likes and broadcast; scalar input gives
a Python float back.
"""
from __future__ import annotations

import math

import numpy as np

EPS = np.finfo(float).eps
TINY = 1e-300
MAX_ITER = 100_000

EULER_GAMMA = 0.5772156649015329


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class ConvergenceError(ArithmeticError):
    """Series or continued fraction did not converge."""


def _out(value, scalar):
    if scalar:
        return float(np.asarray(value).reshape(-1)[0])
    return value


def _check_args(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(x))):
        raise DomainError("incomplete gamma arguments must be finite")
    if np.any(a <= 0):
        raise DomainError("shape argument a must be > 0")
    if np.any(x < 0):
        raise DomainError("limit x must be >= 0")
    return a.astype(float), x.astype(float)


def _series(a, x, tol=EPS):
    """Return S with gamma(a, x) = x**a * exp(-x) * S.

    S = sum_{n>=0} x**n / (a (a+1) ... (a+n)).  Converges for any x but is only
    used where x < a + 1.
    """
    term = 1.0 / a
    total = term.copy()
    ap = a.copy()
    for _ in range(MAX_ITER):
        ap = ap + 1.0
        term = term * x / ap
        total = total + term
        if np.all(np.abs(term) <= tol * np.abs(total)):
            return total
    raise ConvergenceError("incomplete gamma series did not converge")


def _continued_fraction(a, x, tol=EPS):
    """Return C with Gamma(a, x) = x**a * exp(-x) * C (modified Lentz).

    Valid for every real a when x > 0; fast when x >= a + 1.
    """
    b = x + 1.0 - a
    c = np.full_like(b, 1.0 / TINY)
    d = 1.0 / np.where(np.abs(b) < TINY, TINY, b)
    h = d.copy()
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < TINY, TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < TINY, TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= tol):
            return h
    raise ConvergenceError("incomplete gamma continued fraction did not converge")


def gamma_complete(a):
    """Euler gamma function for a > 0.

    Raises
    ------
    DomainError
        For a <= 0 or non-finite a.
    OverflowError
        When Gamma(a) exceeds the double range (a > ~171.6).
    """
    scalar = np.ndim(a) == 0
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("gamma_complete requires finite a > 0")
    out = np.array([math.gamma(v) for v in arr.ravel()]).reshape(arr.shape)
    return _out(out, scalar)


def log_gamma(a):
    """ln Gamma(a) for a > 0."""
    scalar = np.ndim(a) == 0
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("log_gamma requires finite a > 0")
    out = np.array([math.lgamma(v) for v in arr.ravel()]).reshape(arr.shape)
    return _out(out, scalar)


def _lgamma_arr(a):
    return np.vectorize(math.lgamma, otypes=[float])(a)


def _log_prefactor(a, x):
    # a*ln(x) - x, with the x = 0 limit handled by the callers
    with np.errstate(divide="ignore", invalid="ignore"):
        return a * np.log(x) - x


def lower_incomplete_gamma(a, x):
    """Lower incomplete gamma ``gamma(a, x) = int_0^x y**(a-1) e**-y dy``.

    Relative accuracy is about 1e-14 across the tested domain; the contract is
    1e-10.
    """
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    a, x = _check_args(a, x)
    a1, x1 = np.atleast_1d(a), np.atleast_1d(x)
    out = np.zeros_like(x1)
    lo = (x1 < a1 + 1.0) & (x1 > 0)
    hi = x1 >= a1 + 1.0
    if np.any(lo):
        s = _series(a1[lo], x1[lo])
        out[lo] = np.exp(_log_prefactor(a1[lo], x1[lo]) + np.log(s))
    if np.any(hi):
        ah, xh = a1[hi], x1[hi]
        lg = _lgamma_arr(ah)
        if np.any(lg > 709.0):
            raise OverflowError("lower incomplete gamma overflows; use scaled_lower_gamma")
        cf = _continued_fraction(ah, xh)
        out[hi] = np.exp(lg) - np.exp(_log_prefactor(ah, xh)) * cf
    if not np.all(np.isfinite(out)):
        raise OverflowError("lower incomplete gamma overflows; use scaled_lower_gamma")
    return _out(out.reshape(a.shape) if a.ndim else out, scalar)


def upper_incomplete_gamma(a, x):
    """Upper incomplete gamma ``Gamma(a, x) = int_x^inf y**(a-1) e**-y dy``.

    For x >= a + 1 the continued fraction gives the value directly, so the
    subtraction ``Gamma(a) - gamma(a, x)`` is only used where it cannot cancel
    badly.
    """
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    a, x = _check_args(a, x)
    a1, x1 = np.atleast_1d(a), np.atleast_1d(x)
    out = np.empty_like(x1)
    lo = x1 < a1 + 1.0
    hi = ~lo
    if np.any(lo):
        al, xl = a1[lo], x1[lo]
        lg = _lgamma_arr(al)
        if np.any(lg > 709.0):
            raise OverflowError("upper incomplete gamma overflows")
        s = _series(al, xl)
        with np.errstate(under="ignore"):
            low = np.where(xl > 0, np.exp(_log_prefactor(al, xl) + np.log(s)), 0.0)
        out[lo] = np.exp(lg) - low
    if np.any(hi):
        cf = _continued_fraction(a1[hi], x1[hi])
        with np.errstate(under="ignore"):
            out[hi] = np.exp(_log_prefactor(a1[hi], x1[hi])) * cf
    return _out(out.reshape(a.shape) if a.ndim else out, scalar)


def scaled_lower_gamma(a, x):
    """``x**-a * gamma(a, x)`` for a > 0, x >= 0, with the x = 0 limit 1/a.

    Never overflows: for x < a + 1 it is ``exp(-x) * S`` and otherwise
    ``exp(lnGamma(a) - a ln x) - exp(-x) * C``.
    """
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    a, x = _check_args(a, x)
    a1, x1 = np.atleast_1d(a), np.atleast_1d(x)
    out = np.empty_like(x1)
    lo = x1 < a1 + 1.0
    hi = ~lo
    if np.any(lo):
        out[lo] = np.exp(-x1[lo]) * _series(a1[lo], x1[lo])
    if np.any(hi):
        ah, xh = a1[hi], x1[hi]
        with np.errstate(under="ignore"):
            full = np.exp(_lgamma_arr(ah) - ah * np.log(xh))
            tail = np.exp(-xh) * _continued_fraction(ah, xh)
        out[hi] = np.maximum(full - tail, 0.0)
    return _out(out.reshape(a.shape) if a.ndim else out, scalar)


def scaled_upper_gamma(a, x):
    """``x**-a * Gamma(a, x)`` for any real a and x > 0.

    Non-positive shape arguments are reached through the analytic continuation
    of the upper function, which stays finite for x > 0.  Small x with a <= 0 is
    handled by downward recurrence ``G(a) = (x G(a+1) - e**-x) / a`` started
    from a shape in (-1/2, 1/2], where the series is summed with the
    ``Gamma(a) - x**a / a`` cancellation done analytically.
    """
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(x))):
        raise DomainError("arguments must be finite")
    if np.any(x <= 0):
        raise DomainError("scaled_upper_gamma requires x > 0")
    a1, x1 = np.atleast_1d(a).astype(float), np.atleast_1d(x).astype(float)
    out = np.empty_like(x1)
    use_cf = x1 >= np.maximum(a1 + 1.0, 1.0)
    if np.any(use_cf):
        with np.errstate(under="ignore"):
            out[use_cf] = np.exp(-x1[use_cf]) * _continued_fraction(a1[use_cf], x1[use_cf])
    rest = ~use_cf
    if np.any(rest):
        ar, xr = a1[rest], x1[rest]
        vals = np.empty_like(xr)
        for shape in np.unique(ar):
            sel = ar == shape
            vals[sel] = _scaled_upper_small(float(shape), xr[sel])
        out[rest] = vals
    return _out(out.reshape(a.shape) if a.ndim else out, scalar)


_ZETA = (1.6449340668482264, 1.2020569031595942, 1.0823232337111382, 1.0369277551433699)


def _gamma1p_m1_over_a(a):
    # (Gamma(1 + a) - 1) / a, with the a -> 0 limit -EULER_GAMMA
    if a == 0.0:
        return -EULER_GAMMA
    if abs(a) < 1e-3:
        lg = -EULER_GAMMA * a + sum((-1) ** k * z / k * a**k for k, z in enumerate(_ZETA, start=2))
    else:
        lg = math.lgamma(1.0 + a)
    return math.expm1(lg) / a


def _scaled_upper_near_zero(a, x):
    # |a| <= 0.5, small x: Gamma(a, x) = Gamma(a) - x**a sum (-x)**n / (n! (a+n)),
    # with the n = 0 term folded into Gamma(a) - x**a / a to cancel analytically
    lx = np.log(x)
    pow_m1 = np.expm1(a * lx) / a if a != 0.0 else lx
    head = np.exp(-a * lx) * (_gamma1p_m1_over_a(a) - pow_m1)
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for n in range(1, 200):
        term = -term * x / n
        inc = term / (n + a)
        total = total + inc
        if np.all(np.abs(inc) <= EPS * np.abs(total) + TINY):
            break
    return head - total


def _scaled_upper_small(a, x):
    # x < max(a + 1, 1); scalar shape a
    if a >= 0.5:
        with np.errstate(over="ignore"):
            full = np.exp(math.lgamma(a) - a * np.log(x))
        return full - np.exp(-x) * _series(np.full_like(x, a), x)
    steps = 0 if a > -0.5 else int(math.ceil(-a - 0.5))
    shape = a + steps
    g = _scaled_upper_near_zero(shape, x)
    e = np.exp(-x)
    for _ in range(steps):
        shape -= 1.0
        g = (x * g - e) / shape
    return g


def upper_gamma_any(a, x):
    """``Gamma(a, x)`` for any real a and x > 0 (analytic continuation in a)."""
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    g = np.atleast_1d(scaled_upper_gamma(a, x))
    with np.errstate(over="ignore"):
        out = g * np.power(np.atleast_1d(x), np.atleast_1d(a))
    return _out(out.reshape(a.shape) if a.ndim else out, scalar)
