# core/special.py
"""
Special functions used by the closed-form analytics.

Gamma, Beta and the incomplete gamma family come from ``scipy.special``;
this module adds argument checking, log-space helpers and the generalized
exponential integral of real order, which scipy only offers for integer order.

All functions accept scalars or numpy arrays and return the same shape
(a Python float for scalar input).
"""
import math

import numpy as np
from scipy import integrate, special

from core.errors import DivergenceError, DomainError, NumericError

# E_v(x): power-series side below this argument, continued fraction above
EXPINT_SWITCH = 1.5

_CF_EPS = 4.0 * np.finfo(float).eps
_CF_MAXIT = 500
_FPMIN = 1e-300

# fractional orders this close to an integer lose digits in the upward recurrence
_NEAR_INTEGER = 1e-6


def _out(value, scalar: bool):
    if scalar:
        return float(np.asarray(value).reshape(-1)[0])
    return value


def _prepare(x, name: str):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr, arr.ndim == 0


# ---------------------------------------------------------------------------
# Gamma / Beta
# ---------------------------------------------------------------------------

def gamma_fn(x):
    """Γ(x). Negative non-integers go through scipy's reflection."""
    arr, scalar = _prepare(x, "x")
    if np.any((arr <= 0) & (arr == np.round(arr))):
        raise DomainError("Gamma function has poles at non-positive integers")
    return _out(special.gamma(arr), scalar)


def log_gamma(x):
    arr, scalar = _prepare(x, "x")
    if np.any(arr <= 0):
        raise DomainError("log_gamma requires x > 0")
    return _out(special.gammaln(arr), scalar)


def gamma_ratio(a, b):
    """Γ(a)/Γ(b) through a log-gamma difference (safe for a, b far beyond 171)."""
    diff = np.subtract(log_gamma(a), log_gamma(b))
    return float(np.exp(diff)) if np.ndim(diff) == 0 else np.exp(diff)


def beta_fn(x, y):
    """β(x, y), symmetric bit-for-bit (arguments are sorted before evaluation)."""
    xa, xs = _prepare(x, "x")
    ya, ys = _prepare(y, "y")
    if np.any(xa <= 0) or np.any(ya <= 0):
        raise DomainError("Beta function requires positive arguments")
    lo, hi = np.minimum(xa, ya), np.maximum(xa, ya)
    return _out(special.beta(lo, hi), xs and ys)


def log_beta(x, y):
    xa, xs = _prepare(x, "x")
    ya, ys = _prepare(y, "y")
    if np.any(xa <= 0) or np.any(ya <= 0):
        raise DomainError("Beta function requires positive arguments")
    lo, hi = np.minimum(xa, ya), np.maximum(xa, ya)
    return _out(special.betaln(lo, hi), xs and ys)


# ---------------------------------------------------------------------------
# Incomplete gamma
# ---------------------------------------------------------------------------

def _check_incomplete(s, x):
    sa, ss = _prepare(s, "s")
    xa, xs = _prepare(x, "x")
    if np.any(sa <= 0):
        raise DomainError("incomplete gamma requires s > 0")
    if np.any(xa < 0):
        raise DomainError("incomplete gamma requires x >= 0")
    return sa, xa, ss and xs


def regularized_lower_gamma(s, x):
    """P(s, x) = γ(s, x) / Γ(s)."""
    sa, xa, scalar = _check_incomplete(s, x)
    return _out(special.gammainc(sa, xa), scalar)


def lower_incomplete_gamma(s, x):
    """γ(s, x) = ∫₀^x t^{s-1} e^{-t} dt."""
    sa, xa, scalar = _check_incomplete(s, x)
    p = special.gammainc(sa, xa)
    with np.errstate(divide="ignore"):
        value = np.exp(np.log(p) + special.gammaln(sa))
    value = np.where(p == 0.0, 0.0, value)
    return _out(value, scalar)


def upper_incomplete_gamma(s, x):
    """Γ(s, x) = Γ(s) − γ(s, x)."""
    sa, xa, scalar = _check_incomplete(s, x)
    q = special.gammaincc(sa, xa)
    with np.errstate(divide="ignore"):
        value = np.exp(np.log(q) + special.gammaln(sa))
    value = np.where(q == 0.0, 0.0, value)
    return _out(value, scalar)


# ---------------------------------------------------------------------------
# Generalized exponential integral E_v(x) = ∫₁^∞ e^{-xt} t^{-v} dt
# ---------------------------------------------------------------------------

def _expint_small(v: float, x: np.ndarray) -> np.ndarray:
    """0 < x <= EXPINT_SWITCH."""
    n = round(v)
    if abs(v - n) < 1e-15:
        return special.expn(int(n), x)

    m = math.floor(v)
    f = v - m
    if f < _NEAR_INTEGER:
        return _expint_quad(v, x)

    # E_f(x) = x^{f-1} Γ(1-f, x) for the fractional part, then climb with
    # E_{u+1}(x) = (e^{-x} - x E_u(x)) / u
    a = 1.0 - f
    e = np.power(x, f - 1.0) * special.gammaincc(a, x) * special.gamma(a)
    ex = np.exp(-x)
    order = f
    for _ in range(m):
        e = (ex - x * e) / order
        order += 1.0
    return e


def _expint_cf(v: float, x: np.ndarray) -> np.ndarray:
    """Modified Lentz evaluation of the continued fraction, x > EXPINT_SWITCH."""
    b = x + v
    c = np.full_like(x, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _CF_MAXIT + 1):
        a = -i * (v - 1.0 + i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _CF_EPS):
            return h * np.exp(-x)
    raise NumericError("continued fraction for E_v did not converge",
                       {"v": v, "x_min": float(x.min()), "iterations": _CF_MAXIT})


def _expint_quad(v: float, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        val, _ = integrate.quad(lambda t: math.exp(-xi * t) * t ** (-v), 1.0, np.inf,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        out[i] = val
    return out


def generalized_expint(v, x):
    """E_v(x) for real order v > 0 and x >= 0 (x = 0 needs v > 1)."""
    v = float(v)
    if not np.isfinite(v) or v <= 0:
        raise DomainError("generalized_expint requires v > 0")
    arr, scalar = _prepare(x, "x")
    if np.any(arr < 0):
        raise DomainError("generalized_expint requires x >= 0")
    flat = np.atleast_1d(arr).astype(float).reshape(-1)
    out = np.empty_like(flat)

    zero = flat == 0.0
    if zero.any():
        if v <= 1.0:
            raise DivergenceError(f"E_v(0) diverges for v = {v} <= 1")
        out[zero] = 1.0 / (v - 1.0)
    small = (flat > 0.0) & (flat <= EXPINT_SWITCH)
    if small.any():
        out[small] = _expint_small(v, flat[small])
    large = flat > EXPINT_SWITCH
    if large.any():
        out[large] = _expint_cf(v, flat[large])

    if scalar:
        return float(out[0])
    return out.reshape(arr.shape)
