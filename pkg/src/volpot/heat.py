"""Space-time cubature for ``df/dt - nu Laplace f = u`` in free space.

The source is approximated in space by Laguerre-Gaussians of order ``2M``
and in time by a Gaussian of width ``sqrt(D0) tau`` (second order).  The
heat potential of each basis function is a one-dimensional integral over the
elapsed time ``lam``; the sigmoid substitution ``lam = t / (1 + exp(-xi))``
makes it doubly exponentially decaying at both ends, and a trapezoid rule
in ``xi`` turns the solution into a sum of separated products.

Time samples with negative index are taken as zero (the source vanishes
for ``t < 0``).
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .kernels import DomainError
from .quadrature import HeatSigmoid, TrapezoidRule, TuneResult, QuadratureNodeSet, substitute, tune
from .separated import (
    GridSpec,
    SeparatedDensity,
    _normalize_point,
    _term_logs,
    build_kernel,
    sample_density,
)

__all__ = [
    "HeatParams",
    "k2",
    "HeatK2Integrand",
    "tune_heat_rule",
    "SpaceTimeDensity",
    "HeatResult",
    "heat_solve",
    "manufactured_solution",
    "manufactured_density",
    "TIME_CUTOFF",
]

#: Half-width of the time sum in units of ``sqrt(D0)`` grid steps.
TIME_CUTOFF = 8.0


@dataclass(frozen=True)
class HeatParams:
    """Diffusivity, time and space discretization of the heat cubature.

    Only the second-order time basis (``S = 1``) is implemented.
    """

    nu: float
    D0: float
    tau: float
    T: float
    M: int
    D: float
    h: float
    n: int
    S: int = 1

    def __post_init__(self):
        for name in ("nu", "D0", "tau", "T", "D", "h"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.S != 1:
            raise DomainError("only the second-order time basis S = 1 is supported")
        if self.M < 1 or int(self.M) != self.M:
            raise DomainError(f"order M must be a positive integer, got {self.M!r}")
        if self.n < 1 or int(self.n) != self.n:
            raise DomainError(f"dimension n must be a positive integer, got {self.n!r}")


def _k2_log_integrand(p: HeatParams, blocks, t: float, i: int, lam, rest):
    # log of exp(-(t - lam - tau i)^2/(D0 tau^2)) exp(-|x|^2/sig) sig^(-n/2); rest = t - lam
    sig = p.D * p.h**2 + 4.0 * p.nu * lam
    r2 = sum(c * x * x for x, c in blocks)
    n = sum(c for _, c in blocks)
    return -((rest - p.tau * i) ** 2) / (p.D0 * p.tau**2) - r2 / sig - 0.5 * n * np.log(sig)


def k2(x_offsets, t: float, i: int, p: HeatParams, rule: TrapezoidRule) -> float:
    """``K2(x, t, tau i)`` by the sigmoid substitution and trapezoid rule `rule`.

    ``K2 = int_0^t exp(-(t-lam-tau i)^2/(D0 tau^2)) exp(-|x|^2/sig) sig^(-n/2) dlam``
    with ``sig = D h**2 + 4 nu lam``.  `x_offsets` is a sequence of
    ``(offset, multiplicity)`` blocks (or plain offsets).
    """
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t!r}")
    if t == 0:
        return 0.0
    blocks = [(float(b), 1) if np.ndim(b) == 0 else (float(b[0]), int(b[1])) for b in x_offsets]
    xi = rule.nodes
    lam = t / (1.0 + np.exp(-xi))
    rest = t / (1.0 + np.exp(xi))
    log_w = math.log(rule.step * t) - np.logaddexp(0, xi) - np.logaddexp(0, -xi)
    logs = _k2_log_integrand(p, blocks, t, i, lam, rest) + log_w
    return math.fsum(np.exp(logs).tolist())


@dataclass(frozen=True)
class HeatK2Integrand:
    """``K2`` integrand for the tuner, to be used with ``HeatSigmoid(1.0)``.

    A probe is ``(blocks, t, i)``; the substitution supplies ``lam / t``
    and the family rescales to the actual time.
    """

    params: HeatParams

    def log_value(self, log_frac, probe):
        blocks, t, i = probe
        log_frac = np.asarray(log_frac, dtype=float)
        lam = t * np.exp(log_frac)
        rest = -t * np.expm1(log_frac)
        with np.errstate(divide="ignore", invalid="ignore"):
            logv = _k2_log_integrand(self.params, blocks, t, i, lam, rest) + math.log(t)
        return np.ones_like(logv), logv

    def default_probes(self, K: float = 1.0, times: Sequence[float] | None = None, rng=None, extra: int = 0):
        p = self.params
        if times is None:
            times = [p.T]
        probes = []
        reach = int(math.ceil(TIME_CUTOFF * math.sqrt(p.D0)))
        for t in sorted(set(float(v) for v in times)):
            last = int(round(t / p.tau))
            i_values = np.unique(np.linspace(0, last + reach, min(last + reach + 1, 9)).round().astype(int))
            for i in i_values:
                for r in (0.0, 0.5 * K, K):
                    blocks = ((r, 1), (0.0, p.n - 1)) if p.n > 1 else ((r, 1),)
                    probes.append((blocks, t, int(i)))
        return probes


def tune_heat_rule(
    p: HeatParams, times: Sequence[float] | None = None, target: float = 1e-10, budget: int = 10_000
) -> TuneResult:
    """Trapezoid rule in ``xi`` reaching `target` for ``K2`` at the given times."""
    family = HeatK2Integrand(p)
    probes = family.default_probes(times=times)
    return tune(family, HeatSigmoid(1.0), target, probes=probes, budget=budget, norm="pointwise")


@dataclass(frozen=True)
class SpaceTimeDensity:
    """``u(x, tau i) = sum_q time_samples[q][i] * spatial_term_q(x)``.

    ``time_samples[q]`` covers ``i = 0 .. len - 1``; the source is zero for
    negative ``i``.
    """

    spatial: SeparatedDensity
    time_samples: tuple

    def __post_init__(self):
        ts = tuple(np.asarray(a, dtype=float) for a in self.time_samples)
        for a in ts:
            a.setflags(write=False)
        if len(ts) != self.spatial.rank:
            raise ValueError("need one time-sample vector per spatial term")
        if len({a.size for a in ts}) != 1:
            raise ValueError("time-sample vectors must have equal length")
        object.__setattr__(self, "time_samples", ts)

    @property
    def steps(self) -> int:
        return self.time_samples[0].size


class HeatResult(NamedTuple):
    values: np.ndarray
    clipped: np.ndarray


def _time_weights(ell: int, xi: np.ndarray, samples: np.ndarray, D0: float):
    """``sum_i exp(-(c_p - i)^2 / D0) samples[i]`` with ``c_p = ell/(1+e^xi_p)``."""
    centre = ell / (1.0 + np.exp(xi))
    half = TIME_CUTOFF * math.sqrt(D0)
    lo = np.maximum(np.ceil(centre - half), 0).astype(int)
    hi = np.floor(centre + half).astype(int)
    clipped = bool(np.any(hi >= samples.size))
    out = np.empty(xi.size)
    for p in range(xi.size):
        i = np.arange(lo[p], min(hi[p], samples.size - 1) + 1)
        out[p] = math.fsum((np.exp(-((centre[p] - i) ** 2) / D0) * samples[i]).tolist())
    return out, clipped


def heat_solve(
    density: SpaceTimeDensity,
    p: HeatParams,
    points: Sequence,
    rule: TrapezoidRule | None = None,
    threads: int = 1,
) -> HeatResult:
    """Space-time cubature values ``f(h k, tau ell)``.

    Parameters
    ----------
    density : SpaceTimeDensity
    p : HeatParams
    points : sequence of ``(spatial_point, ell)``
        `spatial_point` as for :func:`volpot.separated.evaluate`.
    rule : TrapezoidRule, optional
        Rule in ``xi``; tuned for the requested times at 1e-10 if omitted.

    Returns
    -------
    HeatResult
        Values and, per point, whether the time sum ran past the available
        samples.
    """
    grid = density.spatial.grid
    if not math.isclose(grid.h, p.h, rel_tol=1e-12):
        raise ValueError(f"density grid step {grid.h} differs from h = {p.h}")
    if density.spatial.n != p.n:
        raise ValueError(f"density dimension {density.spatial.n} differs from n = {p.n}")
    pts = [(_normalize_point(sp, p.n), int(ell)) for sp, ell in points]
    if any(ell < 0 for _, ell in pts):
        raise ValueError("time indices must be nonnegative")
    if rule is None:
        times = [p.tau * ell for _, ell in pts if ell > 0] or [p.T]
        rule = tune_heat_rule(p, sorted(set(times))).rule

    m_max = grid.m_max - grid.m_min
    by_level = defaultdict(list)
    for j, (sp, ell) in enumerate(pts):
        by_level[ell].append((j, sp))

    values = np.zeros(len(pts))
    clipped = np.zeros(len(pts), dtype=bool)
    scale = -0.5 * math.log(math.pi * p.D0)

    for ell, members in sorted(by_level.items()):
        if ell == 0:
            continue
        t = p.tau * ell
        mapped = substitute(HeatSigmoid(t), rule.nodes)
        nodes = QuadratureNodeSet(mapped.t, rule.step * mapped.jacobian)
        kernel = build_kernel("heat", p, nodes, m_max, threads=threads)
        weights = []
        level_clipped = False
        for samples in density.time_samples:
            tw, c = _time_weights(ell, rule.nodes, samples, p.D0)
            weights.append(tw)
            level_clipped |= c
        weights = np.array(weights)

        def one(sp):
            cache: dict = {}
            signs, logs = [], []
            for q, term in enumerate(density.spatial.terms):
                coef = term.coef * weights[q] * kernel.weights
                s, lv = _term_logs(kernel, term, sp, grid, cache)
                with np.errstate(divide="ignore"):
                    logs.append(lv + np.log(np.abs(coef)))
                signs.append(s * np.sign(coef))
            with np.errstate(divide="ignore"):
                lv, s = logsumexp(np.concatenate(logs), b=np.concatenate(signs), return_sign=True)
            return 0.0 if s == 0 else float(s) * math.exp(lv + scale)

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                res = list(pool.map(one, [sp for _, sp in members]))
        else:
            res = [one(sp) for _, sp in members]
        for (j, _), v in zip(members, res):
            values[j] = v
            clipped[j] = level_clipped
    return HeatResult(values, clipped)


def manufactured_solution(x, t: float):
    """``t**4 exp(-|x|**2)``; coordinates on the last axis of `x`."""
    x = np.asarray(x, dtype=float)
    return t**4 * np.exp(-np.sum(x * x, axis=-1))


def manufactured_density(p: HeatParams, grid: GridSpec, steps: int | None = None) -> SpaceTimeDensity:
    """Source ``4 t**3 u1(x) - nu t**4 u2(x)`` of :func:`manufactured_solution`.

    Time samples run to ``T/tau`` plus the time-sum cutoff unless `steps` is given.
    """
    if steps is None:
        steps = int(round(p.T / p.tau)) + int(math.ceil(TIME_CUTOFF * math.sqrt(p.D0))) + 2
    ti = p.tau * np.arange(steps)
    u1 = sample_density("u1", grid, p.n)
    u2 = sample_density("u2", grid, p.n)
    spatial = SeparatedDensity(u1.terms + u2.terms, grid)
    return SpaceTimeDensity(spatial, (4 * ti**3, -p.nu * ti**4))
