"""Special functions used by the kernels and their reference solutions.

Generalized Laguerre polynomials, the lower incomplete gamma function
(plain and scaled by ``x**a``), the error functions and the Faddeeva
function ``w(z) = exp(-z**2) erfc(-i z)``, plus the Laguerre-Gaussian
generating functions of the quasi-interpolants.

All functions are pure. Array arguments are broadcast where noted.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sc

__all__ = [
    "DomainError",
    "laguerre",
    "lower_incomplete_gamma",
    "lower_gamma_over_power",
    "erf",
    "erfc",
    "faddeeva",
    "eta_radial",
    "eta_tilde_1d",
    "MAX_ORDER",
]

#: Largest half-order M for which the Laguerre-Gaussian bases are supported.
MAX_ORDER = 8

_EPS = np.finfo(float).eps
_TINY = 1e-300
_MAX_ITER = 1_000_000


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


def laguerre(k: int, alpha: float, y):
    """Generalized Laguerre polynomial ``L_k^(alpha)(y)``.

    Evaluated with the three-term recurrence
    ``(j+1) L_{j+1} = (2j+1+alpha-y) L_j - (j+alpha) L_{j-1}``.

    Parameters
    ----------
    k : int
        Degree, ``k >= 0``.
    alpha : float
        Parameter, ``alpha > -1``.
    y : float or array_like
        Evaluation points.

    Returns
    -------
    float or ndarray
        Same shape as `y`.
    """
    if k < 0 or int(k) != k:
        raise DomainError(f"laguerre degree must be a nonnegative integer, got {k!r}")
    if not alpha > -1.0:
        raise DomainError(f"laguerre parameter must exceed -1, got {alpha!r}")
    y = np.asarray(y, dtype=float)
    prev = np.ones_like(y)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - y
    for j in range(1, int(k)):
        prev, cur = cur, ((2 * j + 1 + alpha - y) * cur - (j + alpha) * prev) / (j + 1)
    return cur if cur.ndim else float(cur)


def _gamma_series(a: float, x: float) -> float:
    # sum_{k>=0} x^k / (a (a+1) ... (a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if term < total * _EPS * 0.5:
            return total
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cf(a: float, x: float) -> float:
    # Gamma(a, x) * exp(x) * x**(-a), modified Lentz
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def _check_gamma_args(a: float, x: float) -> None:
    if not a > 0.0:
        raise DomainError(f"incomplete gamma requires a > 0, got {a!r}")
    if not x >= 0.0:
        raise DomainError(f"incomplete gamma requires x >= 0, got {x!r}")


def lower_incomplete_gamma(a: float, x: float) -> float:
    """Lower incomplete gamma ``gamma(a, x) = int_0^x s**(a-1) exp(-s) ds``.

    Uses the power series for ``x < a + 1`` and ``Gamma(a) - Gamma(a, x)``
    with a continued fraction for ``Gamma(a, x)`` otherwise. Returns
    ``inf`` when the result exceeds the double range (``Gamma(a)`` for
    ``a`` above about 171.6 with ``x`` past ``a + 1``).
    """
    a = float(a)
    x = float(x)
    _check_gamma_args(a, x)
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return _gamma_or_inf(a)
    if x < a + 1.0:
        return _power_exp(a, x) * _gamma_series(a, x)
    full = _gamma_or_inf(a)
    if math.isinf(full):
        return math.inf
    return full - _power_exp(a, x) * _gamma_cf(a, x)


def _power_exp(a: float, x: float) -> float:
    # x**a * exp(-x); pow and exp are each accurate to an ulp, whereas
    # exp(a ln x - x) inherits the rounding of the (possibly large) exponent
    try:
        p = math.pow(x, a)
    except OverflowError:
        p = math.inf
    e = math.exp(-x)
    if math.isfinite(p) and p != 0.0 and e != 0.0:
        v = p * e
        if math.isfinite(v) and v >= 2.2250738585072014e-308:
            return v
    expo = a * math.log(x) - x
    if expo > 709.78:
        return math.inf
    return math.exp(expo)


def _gamma_or_inf(a: float) -> float:
    try:
        return math.gamma(a)
    except OverflowError:
        return math.inf


def lower_gamma_over_power(a: float, x: float) -> float:
    """Scaled lower incomplete gamma ``gamma(a, x) / x**a``.

    Finite for every ``a > 0`` and moderate ``x`` even when ``gamma(a, x)``
    itself over- or underflows; equals ``1/a`` at ``x = 0``.
    """
    a = float(a)
    x = float(x)
    _check_gamma_args(a, x)
    if x < a + 1.0:
        return math.exp(-x) * _gamma_series(a, x)
    upper = math.exp(-x) * _gamma_cf(a, x)
    return math.exp(math.lgamma(a) - a * math.log(x)) - upper


def erf(x):
    """Error function; scalars via :func:`math.erf`, arrays elementwise."""
    if np.ndim(x) == 0:
        return math.erf(float(x))
    return _sc.erf(np.asarray(x, dtype=float))


def erfc(x):
    """Complementary error function ``1 - erf(x)`` without cancellation."""
    if np.ndim(x) == 0:
        return math.erfc(float(x))
    return _sc.erfc(np.asarray(x, dtype=float))


def faddeeva(z):
    """Faddeeva function ``w(z) = exp(-z**2) erfc(-i z)``.

    The upper half-plane is evaluated directly; for ``Im z < 0`` the
    reflection ``w(z) = 2 exp(-z**2) - w(-z)`` is used, which overflows to
    ``inf``/``nan`` components once ``|exp(-z**2)|`` leaves the double
    range (roughly ``Re(z**2) < -709``).

    Parameters
    ----------
    z : complex or array_like of complex

    Returns
    -------
    complex or ndarray of complex
    """
    zz = np.asarray(z, dtype=complex)
    upper = zz.imag >= 0
    out = np.empty_like(zz)
    out[upper] = _sc.wofz(zz[upper])
    low = zz[~upper]
    if low.size:
        with np.errstate(over="ignore", invalid="ignore"):
            out[~upper] = 2.0 * np.exp(-low * low) - _sc.wofz(-low)
    return complex(out) if out.ndim == 0 else out


def eta_radial(M: int, n: int, x):
    """Radial Laguerre-Gaussian generator of order ``2M`` in ``R^n``.

    ``pi**(-n/2) L_{M-1}^(n/2)(|x|**2) exp(-|x|**2)``; `x` has its
    coordinates on the last axis.
    """
    _check_order(M)
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n!r}")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1) if x.ndim else x * x
    return math.pi ** (-n / 2) * laguerre(M - 1, n / 2, r2) * np.exp(-r2)


def eta_tilde_1d(M: int, x):
    """One-dimensional generator ``L_{M-1}^(1/2)(x**2) exp(-x**2)``.

    Its integral over the line is ``sqrt(pi)``; moments of order 1 to
    ``2M - 1`` vanish.
    """
    _check_order(M)
    x = np.asarray(x, dtype=float)
    out = laguerre(M - 1, 0.5, x * x) * np.exp(-x * x)
    return out


def _check_order(M: int) -> None:
    if M < 1 or int(M) != M:
        raise DomainError(f"order M must be a positive integer, got {M!r}")
    if M > MAX_ORDER:
        raise DomainError(f"order M={M} exceeds the supported maximum {MAX_ORDER}")
