"""Separable integrand factors and closed-form reference potentials.

Every potential here acting on a (Laguerre-)Gaussian has a representation
as a one-dimensional integral over a parameter ``t`` whose integrand is a
product of per-coordinate factors.  This module provides those factors
(``g_newton``, ``advdiff_factor``, ``heat_factor``) and the exact
potentials used as oracles.

Conventions
-----------
Scalars shared by all coordinates (``1/4``, ``exp(-c t/2)``, Jacobians) are
never part of a per-coordinate factor.  The only exception is one
``(1 + t)**(-1/2)`` per coordinate, which the kernel tables in
:mod:`volpot.separated` attach so that sampled factors stay O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import (
    MAX_ORDER,
    DomainError,
    faddeeva,
    laguerre,
    lower_gamma_over_power,
)

__all__ = [
    "CubatureParams",
    "AdvectionDiffusionParams",
    "newton_gaussian_exact",
    "newton_eta_radial_exact",
    "g_newton",
    "advdiff_factor",
    "advdiff_exact_n3",
    "heat_factor",
    "exact_u1",
    "exact_u1_potential",
    "exact_u2",
    "exact_u2_potential",
]


@dataclass(frozen=True)
class CubatureParams:
    """Grid step `h`, scaling `D`, half-order `M` and dimension `n`."""

    n: int
    h: float
    D: float
    M: int

    def __post_init__(self):
        if self.n < 1 or int(self.n) != self.n:
            raise DomainError(f"dimension n must be a positive integer, got {self.n!r}")
        if not self.h > 0:
            raise DomainError(f"grid step h must be positive, got {self.h!r}")
        if not self.D > 0:
            raise DomainError(f"scaling D must be positive, got {self.D!r}")
        if self.M < 1 or self.M > MAX_ORDER or int(self.M) != self.M:
            raise DomainError(f"order M must be in 1..{MAX_ORDER}, got {self.M!r}")


@dataclass(frozen=True)
class AdvectionDiffusionParams:
    """Coefficients of ``-Laplace + 2 b . grad + c`` with real `b`, `c`."""

    b: tuple
    c: float

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if self.lambda_squared < 0:
            raise DomainError(
                f"c + |b|^2 must be nonnegative, got {self.lambda_squared!r}"
            )

    @property
    def lambda_squared(self) -> float:
        return self.c + sum(v * v for v in self.b)


def newton_gaussian_exact(n: int, r) -> float:
    """Newton potential of ``exp(-|x|**2)`` in ``R^n`` at radius `r`.

    ``gamma(n/2 - 1, r**2) / (4 r**(n-2))``, with value ``1/(2(n-2))``
    at the origin.  Finite in very high dimension because the scaled
    incomplete gamma is used.
    """
    if n < 3:
        raise DomainError(f"Newton potential needs n >= 3, got {n!r}")
    return 0.25 * lower_gamma_over_power(n / 2 - 1, float(r) ** 2)


def newton_eta_radial_exact(M: int, n: int, r) -> float:
    """Newton potential of the radial generator ``eta_radial(M, n, .)``."""
    if n < 3:
        raise DomainError(f"Newton potential needs n >= 3, got {n!r}")
    r2 = float(r) ** 2
    tail = 0.0
    for j in range(M - 1):
        tail += laguerre(j, n / 2 - 1, r2) / (4 * (j + 1))
    return math.pi ** (-n / 2) * (newton_gaussian_exact(n, r) + math.exp(-r2) * tail)


def g_newton(M: int, x, t):
    """Per-coordinate factor of the Newton integrand.

    ``exp(-s) sum_{k<M} (1+t)**(-k) L_k^(-1/2)(s)`` with ``s = x**2/(1+t)``.
    Broadcasts over `x` and `t`.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    inv = 1.0 / (1.0 + t)
    s = x * x * inv
    total = np.zeros(np.broadcast(s, inv).shape)
    scale = np.ones_like(total)
    for k in range(M):
        total = total + scale * laguerre(k, -0.5, s)
        scale = scale * inv
    out = np.exp(-s) * total
    return out if out.ndim else float(out)


def advdiff_factor(M: int, x, t, b_j):
    """Per-coordinate factor ``g_newton(M, x - t b_j, 2t)`` of the
    advection-diffusion integrand.

    The shared scalar ``exp(-c t/2) (1 + 2t)**(-n/2) / 2`` belongs to the
    caller.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    return g_newton(M, x - t * b_j, 2.0 * t)


def heat_factor(M: int, x, lam, D: float, h: float, nu: float):
    """Per-coordinate factor of the heat integrand.

    ``exp(-x**2/sig) sum_{l<M} (D h**2)**l sig**(-l-1/2) L_l^(-1/2)(x**2/sig)``
    with ``sig = D h**2 + 4 nu lam``; `x` is a physical offset.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    base = D * h * h
    sig = base + 4.0 * nu * lam
    s = x * x / sig
    ratio = base / sig
    total = np.zeros(np.broadcast(s, sig).shape)
    scale = np.ones_like(total)
    for ell in range(M):
        total = total + scale * laguerre(ell, -0.5, s)
        scale = scale * ratio
    out = np.exp(-s) * total / np.sqrt(sig)
    return out if out.ndim else float(out)


def _w_scaled(y: float, log_scale: float) -> float:
    # exp(log_scale) * w(i y) for real y, without forming exp(y**2) alone
    if y >= 0:
        return math.exp(log_scale) * faddeeva(1j * y).real
    # w(iy) = 2 exp(y^2) - w(-iy)
    return 2.0 * math.exp(log_scale + y * y) - math.exp(log_scale) * faddeeva(-1j * y).real


def _faddeeva_derivatives(z: complex, count: int) -> list:
    # w^(k)(z), k = 0..count-1; w' = -2 z w + 2i/sqrt(pi),
    # w^(k+2) = -2 z w^(k+1) - 2 (k+1) w^(k)
    w0 = complex(faddeeva(z))
    ders = [w0, -2 * z * w0 + 2j / math.sqrt(math.pi)]
    while len(ders) < count:
        k = len(ders) - 2
        ders.append(-2 * z * ders[k + 1] - 2 * (k + 1) * ders[k])
    return ders[:count]


def advdiff_exact_n3(b, c: float, x) -> float:
    """Exact solution of ``-Laplace f + 2 b . grad f + c f = exp(-|x|**2)``
    in ``R^3``, via the Faddeeva function.

    ``(sqrt(pi)/4) exp(-|x|**2)/R [w(i(lam-R)/2) - w(i(lam+R)/2)]`` with
    ``R = |2x + b|`` and ``lam = sqrt(c + |b|**2) > 0``.  Near ``R = 0``
    a two-term Taylor expansion in ``R`` replaces the quotient.
    """
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if b.shape != (3,) or x.shape != (3,):
        raise DomainError("advdiff_exact_n3 needs 3-vectors b and x")
    lam2 = float(c) + float(b @ b)
    if not lam2 > 0:
        raise DomainError(f"c + |b|^2 must be positive, got {lam2!r}")
    lam = math.sqrt(lam2)
    R = float(np.linalg.norm(2 * x + b))
    r2 = float(x @ x)
    if R < 1e-3:
        # F(R) = w(z0 - iR/2) - w(z0 + iR/2) = -2 [w'(z0)(iR/2) + w'''(z0)(iR/2)^3/6] + O(R^5)
        z0 = 1j * lam / 2
        _, w1, _, w3 = _faddeeva_derivatives(z0, 4)
        q = 1j / 2
        F_over_R = -2 * (w1 * q + w3 * q**3 * R * R / 6)
        return (math.sqrt(math.pi) / 4) * math.exp(-r2) * F_over_R.real
    first = _w_scaled((lam - R) / 2, -r2)
    second = _w_scaled((lam + R) / 2, -r2)
    return (math.sqrt(math.pi) / 4) * (first - second) / R


def _radius_squared(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def exact_u1(n: int, x):
    """Test density ``exp(-|x|**2)``; coordinates on the last axis of `x`."""
    return np.exp(-_radius_squared(x))


def exact_u1_potential(n: int, x):
    """Newton potential of `exact_u1`."""
    r2 = _radius_squared(x)
    if np.ndim(r2) == 0:
        return newton_gaussian_exact(n, math.sqrt(float(r2)))
    return np.array([newton_gaussian_exact(n, math.sqrt(v)) for v in r2.ravel()]).reshape(r2.shape)


def exact_u2(n: int, x):
    """Test density ``(4|x|**2 - 2n) exp(-|x|**2)``, the Laplacian of `exact_u1`."""
    r2 = _radius_squared(x)
    return (4 * r2 - 2 * n) * np.exp(-r2)


def exact_u2_potential(n: int, x):
    """Newton potential of `exact_u2`, i.e. ``-exp(-|x|**2)``."""
    if n < 3:
        raise DomainError(f"Newton potential needs n >= 3, got {n!r}")
    return -np.exp(-_radius_squared(x))
