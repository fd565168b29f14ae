"""Double-exponential substitutions, truncated trapezoidal rules and a tuner.

A substitution ``t = phi(u)`` turns a half-line integral ``int_0^inf F(t) dt``
into ``int F(phi(u)) phi'(u) du`` over the real line, and the truncated
trapezoidal rule ``step * sum_{k=N0}^{N1} f(k step)`` is applied to the result.
:func:`tune` searches for the cheapest rule that reaches a prescribed
relative error uniformly over a set of probe points.

Everything that can overflow (``t`` reaches ``exp(1e3)`` and beyond on the
generous windows the tuner scans) is handled in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .specfun import laguerre

__all__ = [
    "WaldvogelTriple",
    "SingleExp",
    "HeatSigmoid",
    "TrapezoidRule",
    "QuadratureNodeSet",
    "Substituted",
    "substitute",
    "build_nodes",
    "integrate",
    "newton_nodes",
    "advdiff_nodes",
    "NewtonIntegrand",
    "HelmholtzIntegrand",
    "TuneResult",
    "TunerBudgetExceeded",
    "tune",
    "radial_probes",
    "log_g_newton",
    "PRESETS",
    "SUBSTITUTIONS",
]


class Substituted(NamedTuple):
    t: np.ndarray
    jacobian: np.ndarray
    saturated: np.ndarray


def _softplus(x):
    # log(1 + exp(x))
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class WaldvogelTriple:
    """``t = exp(xi)``, ``xi = a (tau + exp(tau))``, ``tau = b (u - exp(-u))``."""

    a: float
    b: float
    scan_range = (-10.0, 10.0)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"substitution parameters must be positive, got a={self.a}, b={self.b}")

    def log_map(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            tau = self.b * (u - np.exp(-u))
            log_t = self.a * (tau + np.exp(tau))
            log_jac = (
                math.log(self.a * self.b) + _softplus(-u) + _softplus(tau) + log_t
            )
        return log_t, log_jac


@dataclass(frozen=True)
class SingleExp:
    """``t = exp(b (u - exp(-u)))``; double-exponential only with a damping factor."""

    b: float
    scan_range = (-10.0, 12.0)

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"substitution parameter must be positive, got b={self.b}")

    def log_map(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            log_t = self.b * (u - np.exp(-u))
            log_jac = math.log(self.b) + _softplus(-u) + log_t
        return log_t, log_jac


@dataclass(frozen=True)
class HeatSigmoid:
    """``lam = t / (1 + exp(-xi))`` mapping the real line onto ``(0, t)``.

    The Jacobian ``t exp(-xi) / (1 + exp(-xi))**2`` equals ``t / (4 cosh(xi/2)**2)``.
    """

    t: float = 1.0
    scan_range = (-80.0, 80.0)

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"sigmoid substitution needs t > 0, got {self.t}")

    def log_map(self, u):
        u = np.asarray(u, dtype=float)
        lt = math.log(self.t)
        log_t = lt - _softplus(-u)
        log_jac = lt - _softplus(-u) - _softplus(u)
        return log_t, log_jac


Substitution = WaldvogelTriple | SingleExp | HeatSigmoid


def substitute(sub: Substitution, u) -> Substituted:
    """Map `u` to ``(t, dt/du)``.

    Values beyond the double range come back as ``inf`` (or ``0``) with
    the `saturated` mask set; a tuner reads that as the edge of the usable
    window.
    """
    log_t, log_jac = sub.log_map(u)
    with np.errstate(over="ignore", invalid="ignore"):
        t = np.exp(log_t)
        jac = np.exp(log_jac)
    saturated = ~(np.isfinite(t) & np.isfinite(jac)) | (np.asarray(log_t) > 709.0)
    t = np.where(np.isnan(t), np.inf, t)
    jac = np.where(np.isnan(jac), np.inf, jac)
    if np.ndim(t) == 0:
        return Substituted(float(t), float(jac), bool(saturated))
    return Substituted(t, jac, saturated)


@dataclass(frozen=True)
class TrapezoidRule:
    """Truncated trapezoidal rule with nodes ``u_k = k * step``, ``N0 <= k <= N1``."""

    step: float
    N0: int
    N1: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"trapezoid step must be positive, got {self.step}")
        if self.N1 < self.N0:
            raise ValueError(f"need N1 >= N0, got N0={self.N0}, N1={self.N1}")

    @property
    def count(self) -> int:
        return self.N1 - self.N0 + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N0, self.N1 + 1) * self.step


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuadratureNodeSet:
    """Nodes ``t`` and weights ``w`` (step, Jacobian and shared scalars included)."""

    t: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "w", _frozen(self.w))
        if self.t.shape != self.w.shape or self.t.ndim != 1:
            raise ValueError("node and weight arrays must be 1-D of equal length")
        if not np.all(np.isfinite(self.w)):
            raise ValueError("quadrature weights must be finite")

    def __len__(self) -> int:
        return self.t.size


def build_nodes(
    sub: Substitution,
    rule: TrapezoidRule,
    shared_prefactor: Callable[[np.ndarray], np.ndarray] | None = None,
) -> QuadratureNodeSet:
    """Nodes ``t(u_k)`` and weights ``step * t'(u_k) * shared_prefactor(t(u_k))``."""
    mapped = substitute(sub, rule.nodes)
    if np.any(mapped.saturated):
        raise ValueError(f"rule {rule} leaves the representable range of {sub}")
    w = rule.step * mapped.jacobian
    if shared_prefactor is not None:
        w = w * shared_prefactor(mapped.t)
    return QuadratureNodeSet(mapped.t, w)


def integrate(nodeset: QuadratureNodeSet, per_node_value: Callable[[np.ndarray], np.ndarray]) -> float:
    """``sum_l w_l f(t_l)``, correctly rounded (independent of summation order)."""
    if len(nodeset) == 0:
        return 0.0
    vals = np.broadcast_to(np.asarray(per_node_value(nodeset.t), dtype=float), nodeset.t.shape)
    return math.fsum((nodeset.w * vals).tolist())


def newton_nodes(sub: Substitution, rule: TrapezoidRule) -> QuadratureNodeSet:
    """Nodes for ``L_n(prod eta~) = 1/4 int_0^inf (1+t)^(-n/2) prod g_M dt``."""
    return build_nodes(sub, rule, lambda t: np.full_like(t, 0.25))


def advdiff_nodes(sub: Substitution, rule: TrapezoidRule, c: float = 0.0) -> QuadratureNodeSet:
    """Nodes for the advection-diffusion integral in its ``t`` variable.

    The substitution is applied to ``s = 2t`` (the variable of the damped
    Newton-type integral ``1/4 int exp(-c s/4) (1+s)^(-n/2) ... ds``), so the
    same tuned rule serves both forms.  Returned nodes are ``t = s/2``; the
    weights carry ``exp(-c s/4)/4``.
    """
    mapped = substitute(sub, rule.nodes)
    if np.any(mapped.saturated):
        raise ValueError(f"rule {rule} leaves the representable range of {sub}")
    s = mapped.t
    w = rule.step * mapped.jacobian * 0.25 * np.exp(-c * s / 4.0)
    return QuadratureNodeSet(s / 2.0, w)


def log_g_newton(M: int, x, log1pt):
    """Sign and log-magnitude of ``g_newton(M, x, t)`` given ``log(1 + t)``."""
    x = np.asarray(x, dtype=float)
    inv = np.exp(-np.asarray(log1pt, dtype=float))
    s = x * x * inv
    total = np.zeros(np.broadcast(s, inv).shape)
    scale = np.ones_like(total)
    for k in range(M):
        total = total + scale * laguerre(k, -0.5, s)
        scale = scale * inv
    with np.errstate(divide="ignore"):
        return np.sign(total), np.log(np.abs(total)) - s


# A probe is a point given as ((coordinate, multiplicity), ...) blocks.
Probe = tuple


def radial_probes(n: int, K: float, M: int = 1, count: int = 32, rng=None, extra: int = 0) -> list:
    """Probe points with ``|x| <= K``: the origin and `count` log-spaced radii.

    Each radius contributes an axis point; for ``M >= 2`` (integrands that
    are not radial) also a diagonal point and a mixed-sign point.  With
    `rng`, `extra` random points of random radius are appended.
    """
    radii = np.logspace(math.log10(K) - 6, math.log10(K), count)
    probes = [((0.0, n),)]
    for r in radii:
        probes.append(_axis_probe(n, r))
        if M >= 2 and n >= 2:
            probes.append(((r / math.sqrt(n), n),))
            rest = ((0.0, n - 2),) if n > 2 else ()
            probes.append(((r / math.sqrt(2), 1), (-r / math.sqrt(2), 1)) + rest)
    if rng is not None:
        for _ in range(extra):
            r = K * rng.random()
            d = rng.normal(size=min(n, 4))
            d *= r / np.linalg.norm(d)
            blocks = tuple((float(v), 1) for v in d)
            if n > d.size:
                blocks += ((0.0, n - d.size),)
            probes.append(blocks)
    return probes


def _axis_probe(n: int, r: float) -> Probe:
    return ((float(r), 1),) if n == 1 else ((float(r), 1), (0.0, n - 1))


@dataclass(frozen=True)
class NewtonIntegrand:
    """``(1+t)^(-n/2) prod_j g_M(x_j, t)``, the integrand of ``I_M``."""

    n: int
    M: int = 1

    def log_value(self, log_t, probe: Probe):
        log1pt = _softplus(log_t)
        sign = np.ones_like(log1pt)
        logv = -0.5 * self.n * log1pt
        for x, mult in probe:
            s, lg = log_g_newton(self.M, x, log1pt)
            sign = sign * s**mult
            logv = logv + mult * lg
        return sign, logv

    def default_probes(self, K: float = 1e3, rng=None, extra: int = 0) -> list:
        return radial_probes(self.n, K, self.M, rng=rng, extra=extra)


@dataclass(frozen=True)
class HelmholtzIntegrand:
    """``exp(-a2 t/4) (1+t)^(-n/2) prod_j g_M(x_j, t)``, the integrand of ``K_M``.

    ``K_M`` decays like ``exp(-a |x|)``, so uniformity over a large ball is
    measured against the largest value on the probe set by default.
    """

    n: int
    a2: float
    M: int = 1
    default_norm = "sup"

    def log_value(self, log_t, probe: Probe):
        sign, logv = NewtonIntegrand(self.n, self.M).log_value(log_t, probe)
        with np.errstate(over="ignore"):
            damp = -0.25 * self.a2 * np.exp(log_t)
        return sign, logv + damp

    def default_probes(self, K: float = 1e3, rng=None, extra: int = 0) -> list:
        return radial_probes(self.n, K, self.M, rng=rng, extra=extra)


class TunerBudgetExceeded(RuntimeError):
    """No rule within the node budget reaches the requested error."""


@dataclass(frozen=True)
class TuneResult:
    rule: TrapezoidRule
    node_count: int
    achieved_error: float
    probes: int = field(default=0)


def _log_terms(family, sub, u, probes):
    """Signs and log-magnitudes of ``f(u) = F(t(u)) t'(u)`` per probe (P x U)."""
    log_t, log_jac = sub.log_map(u)
    signs = np.empty((len(probes), u.size))
    logs = np.empty((len(probes), u.size))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for p, probe in enumerate(probes):
            s, lv = family.log_value(log_t, probe)
            lv = lv + log_jac
            bad = ~np.isfinite(lv) | ~np.isfinite(log_t)
            signs[p] = np.where(bad, 0.0, s)
            logs[p] = np.where(bad, -np.inf, lv)
    return signs, logs


def _signed_logsum(signs, logs, log_step):
    """Row-wise ``log|sum sign*exp(log)|`` and sign of the sum."""
    with np.errstate(divide="ignore"):
        val, sgn = logsumexp(logs, axis=1, b=signs, return_sign=True)
    return sgn, val + log_step


def _rel_error(sa, la, sb, lb, norm="pointwise"):
    """Per-probe error of ``sa e^la`` against ``sb e^lb``.

    ``pointwise`` divides by each reference value, ``sup`` by the largest
    reference magnitude over the probe set.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        if norm == "sup":
            scale = np.max(np.where(sb != 0, lb, -np.inf))
            return np.abs(sa * np.exp(la - scale) - sb * np.exp(lb - scale))
        same = (sa == sb) & (sb != 0)
        err = np.where(same, np.abs(np.expm1(la - lb)), np.inf)
        both_zero = (sa == 0) & (sb == 0)
    return np.where(both_zero, 0.0, err)


def _quad(family, sub, probes, step, lo, hi):
    k = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1)
    signs, logs = _log_terms(family, sub, k * step, probes)
    return _signed_logsum(signs, logs, math.log(step))


def tune(
    family,
    sub: Substitution,
    target: float,
    K: float = 1e3,
    probes: Sequence[Probe] | None = None,
    budget: int = 10_000,
    norm: str | None = None,
) -> TuneResult:
    """Cheapest trapezoid rule reaching relative error `target` on all probes.

    1. A generous window is found by scanning the transformed integrand and
       keeping ``u`` where it exceeds ``target * |I| / 1e3``.
    2. The step is shrunk (halving, then bisection in log scale) until the
       error against a 4x finer rule on a widened window is at most
       ``target / 2``; among passing steps the largest one is kept.
    3. Nodes are dropped from either end as long as each dropped tail is
       below ``target / 10`` relative.

    `norm` selects how errors are scaled: ``"pointwise"`` (each probe by its
    own value) or ``"sup"`` (by the largest value over the probe set).  The
    default is the family's ``default_norm``.

    Raises
    ------
    TunerBudgetExceeded
        If the required node count exceeds `budget`.
    """
    if not (1e-13 <= target <= 1e-3):
        raise ValueError(f"target relative error must lie in [1e-13, 1e-3], got {target}")
    if probes is None:
        probes = family.default_probes(K)
    probes = list(probes)
    if norm is None:
        norm = getattr(family, "default_norm", "pointwise")
    if norm not in ("pointwise", "sup"):
        raise ValueError(f"unknown error norm {norm!r}")

    lo_scan, hi_scan = sub.scan_range
    du = 0.005
    u_scan = np.arange(lo_scan, hi_scan + du, du)
    signs, logs = _log_terms(family, sub, u_scan, probes)
    _, log_total = _signed_logsum(np.abs(signs), logs, math.log(du))
    if norm == "sup":
        log_total = np.full_like(log_total, np.max(log_total))
    thresh = (math.log(target) - math.log(1e3) + log_total)[:, None]
    keep = np.any(logs >= thresh, axis=0)
    if not keep.any():
        raise ValueError("integrand vanishes on the whole scan range")
    idx = np.nonzero(keep)[0]
    lo = u_scan[idx[0]] - 0.1
    hi = u_scan[idx[-1]] + 0.1
    margin = 0.5

    def error_at(step, N0=None, N1=None):
        a = lo if N0 is None else N0 * step
        b = hi if N1 is None else N1 * step
        sq, lq = _quad(family, sub, probes, step, a, b)
        sr, lr = _quad(family, sub, probes, step / 4, lo - margin, hi + margin)
        return float(np.max(_rel_error(sq, lq, sr, lr, norm)))

    def count(step):
        return math.ceil(hi / step) - math.floor(lo / step) + 1

    goal = target / 2
    for _attempt in range(6):
        step = min(1.0, (hi - lo) / 4)
        while error_at(step) > goal:
            step /= 2
            if count(step) > 4 * budget:
                raise TunerBudgetExceeded(
                    f"target {target:g} needs more than {budget} nodes for {family}"
                )
        good, bad = step, 2 * step
        for _ in range(24):
            mid = math.sqrt(good * bad)
            if error_at(mid) <= goal:
                good = mid
            else:
                bad = mid
        step = good

        k = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1)
        signs, logs = _log_terms(family, sub, k * step, probes)
        sq, lq = _signed_logsum(signs, logs, math.log(step))
        scale = np.full_like(lq, np.max(lq)) if norm == "sup" else lq
        rel = np.exp(logs + math.log(step) - scale[:, None])  # |f_k| step / |Q|
        left = np.cumsum(rel, axis=1).max(axis=0)
        right = np.cumsum(rel[:, ::-1], axis=1).max(axis=0)[::-1]
        i0 = int(np.searchsorted(left >= target / 10, True))
        i1 = k.size - 1 - int(np.searchsorted(right[::-1] >= target / 10, True))
        N0, N1 = int(k[i0]), int(k[i1])
        achieved = error_at(step, N0, N1)
        if N1 - N0 + 1 > budget:
            raise TunerBudgetExceeded(
                f"target {target:g} needs {N1 - N0 + 1} nodes (budget {budget}) for {family}"
            )
        if achieved <= target:
            rule = TrapezoidRule(step, N0, N1)
            return TuneResult(rule, rule.count, achieved, len(probes))
        goal /= 4
    raise TunerBudgetExceeded(f"could not certify target {target:g} for {family}")


@dataclass(frozen=True)
class Preset:
    sub: Substitution
    rule: TrapezoidRule


#: Fixed Newton rules.  ``compact-a2b2`` is the 116-node a=b=2 rule;
#: ``wide-a2b2`` keeps its substitution and step on a window wide enough
#: that truncation stays below 1e-12 relative for every n.
PRESETS = {
    "compact-a2b2": Preset(WaldvogelTriple(2.0, 2.0), TrapezoidRule(0.02, -35, 80)),
    "wide-a2b2": Preset(WaldvogelTriple(2.0, 2.0), TrapezoidRule(0.02, -120, 90)),
    "fine-a6b5": Preset(WaldvogelTriple(6.0, 5.0), TrapezoidRule(0.003, 39, 250)),
}

#: Named substitution parameter sets for tuning.
SUBSTITUTIONS = {
    "ab1": WaldvogelTriple(1.0, 1.0),
    "a6b5": WaldvogelTriple(6.0, 5.0),
    "ab2": WaldvogelTriple(2.0, 2.0),
    "single1": SingleExp(1.0),
}
