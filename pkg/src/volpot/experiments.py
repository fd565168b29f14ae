"""Experiment configuration and runners behind the command-line interface."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from . import kernels as kn
from .heat import HeatParams, heat_solve, manufactured_density, manufactured_solution, tune_heat_rule
from .quadrature import (
    PRESETS,
    HelmholtzIntegrand,
    NewtonIntegrand,
    SingleExp,
    TrapezoidRule,
    WaldvogelTriple,
    advdiff_nodes,
    newton_nodes,
    radial_probes,
    tune,
)
from .separated import GridSpec, axis_point, build_kernel, evaluate, gaussian_potential, sample_density

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ReportRow",
    "TuneRow",
    "load_config",
    "run_newton_table",
    "run_convergence",
    "run_tune",
    "run_advdiff",
    "run_heat",
    "COMMANDS",
]

COMMANDS = ("newton-table", "convergence", "tune-quad", "advdiff", "heat", "export-kernel")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending source and line."""


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = "newton-table"
    kind: str = "newton"
    n: tuple = (3,)
    M: int = 4
    h: tuple = (0.05,)
    D: float = 3.5
    A: float = 6.0
    density: str = "u1"
    points: tuple = (0.0, 1.0, 2.0, 3.0)
    preset: str = "wide-a2b2"
    sub: tuple = ()
    step: float | None = None
    N0: int | None = None
    N1: int | None = None
    family: str = "I"
    target: tuple = (1e-5, 1e-9)
    K: float = 1e3
    a2: tuple = (0.01,)
    b: tuple = (0.0,)
    c: tuple = (0.01, 1.0, 4.0)
    nu: float = 1.0
    D0: float = 2.0
    tau: tuple = ()
    T: float = 1.0
    budget: int = 10_000
    seed: int | None = None
    threads: int = 1
    cubature: bool = False
    timing: bool = False
    format: str = "csv"
    out: str | None = None

    def echo(self) -> str:
        """``key=value`` pairs of every field, for the report header."""
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            parts.append(f"{f.name}={_format_value(v)}")
        return " ".join(parts)


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


#: Defaults that differ from the field defaults, per subcommand.
DEFAULTS = {
    "newton-table": {},
    "convergence": dict(M=4, D=5.0, density="u2", points=(1.0,), preset="fine-a6b5",
                        h=tuple(0.1 * 2.0 ** (1 - k) for k in range(5))),
    "tune-quad": dict(M=1, sub=(1.0, 1.0), target=(1e-5, 1e-7, 1e-9, 1e-11)),
    "advdiff": dict(kind="advdiff", M=1, points=(0.0, 0.5, 1.0, 2.0), target=(1e-10,)),
    "heat": dict(kind="heat", n=(1,), M=1, D=2.0, A=5.0, h=(0.1, 0.05, 0.025), points=(0.0, 0.8)),
    "export-kernel": dict(format="bin"),
}


def _parse_bool(s: str) -> bool:
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt(conv):
    return lambda s: None if s.strip().lower() in ("", "none") else conv(s)


def _list(conv):
    return lambda s: tuple(conv(p) for p in s.split(",") if p.strip())


_PARSERS = {
    "command": str.strip,
    "kind": str.strip,
    "n": _list(int),
    "M": int,
    "h": _list(float),
    "D": float,
    "A": float,
    "density": str.strip,
    "points": _list(float),
    "preset": str.strip,
    "sub": _list(float),
    "step": _opt(float),
    "N0": _opt(int),
    "N1": _opt(int),
    "family": str.strip,
    "target": _list(float),
    "K": float,
    "a2": _list(float),
    "b": _list(float),
    "c": _list(float),
    "nu": float,
    "D0": float,
    "tau": _list(float),
    "T": float,
    "budget": int,
    "seed": _opt(int),
    "threads": int,
    "cubature": _parse_bool,
    "timing": _parse_bool,
    "format": str.strip,
    "out": _opt(str.strip),
}


def parse_pairs(pairs: Sequence[tuple], source: str = "<flags>") -> tuple:
    """Convert ``(line_no, key, raw_value)`` triples to typed values.

    Returns the values and, per key, where it was set (``path:line``).
    """
    out, origins = {}, {}
    for line_no, key, raw in pairs:
        where = f"{source}:{line_no}" if line_no else source
        if key not in _PARSERS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            out[key] = _PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
        origins[key] = where
    return out, origins


def read_config_file(path) -> tuple:
    """Flat ``key = value`` file; ``#`` starts a comment.

    Returns ``(values, origins)`` as :func:`parse_pairs`.
    """
    pairs = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    for i, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{i}: expected 'key = value', got {text!r}")
        key, raw = text.split("=", 1)
        pairs.append((i, key.strip(), raw.strip()))
    return parse_pairs(pairs, str(path))


def load_config(
    command: str,
    file_values: dict | None = None,
    overrides: dict | None = None,
    origins: dict | None = None,
) -> ExperimentConfig:
    """Merge subcommand defaults, config-file values and flag overrides (flags win).

    `origins` maps keys to ``path:line`` (or flag) locations used in error
    messages.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    values = dict(DEFAULTS[command])
    values.update(file_values or {})
    values.update(overrides or {})
    values["command"] = command
    cfg = ExperimentConfig(**values)
    validate(cfg, origins or {})
    return cfg


def validate(cfg: ExperimentConfig, origins: dict | None = None) -> None:
    origins = origins or {}

    def bad(msg, *keys):
        where = next((origins[k] for k in keys if k in origins), "config")
        raise ConfigError(f"{where}: {msg}")

    if not cfg.n or any(v < 1 for v in cfg.n):
        bad(f"dimensions must be positive integers, got {cfg.n}", "n")
    if not 1 <= cfg.M <= 8:
        bad(f"M must be in 1..8, got {cfg.M}", "M")
    if not cfg.h or any(not v > 0 for v in cfg.h):
        bad(f"grid steps must be positive, got {cfg.h}", "h")
    for name in ("D", "A", "K", "nu", "D0", "T"):
        if not getattr(cfg, name) > 0:
            bad(f"{name} must be positive, got {getattr(cfg, name)}", name)
    if cfg.kind not in ("newton", "advdiff", "heat"):
        bad(f"kind must be newton, advdiff or heat, got {cfg.kind!r}", "kind")
    if cfg.density not in ("u1", "u2"):
        bad(f"density must be u1 or u2, got {cfg.density!r}", "density")
    if cfg.preset not in PRESETS:
        bad(f"unknown preset {cfg.preset!r}; choose from {', '.join(sorted(PRESETS))}", "preset")
    if cfg.sub and (len(cfg.sub) not in (1, 2) or any(not v > 0 for v in cfg.sub)):
        bad(f"sub must be 'a,b' (or 'b' for the single-exponential map) with positive values, got {cfg.sub}", "sub")
    if cfg.family not in ("I", "K"):
        bad(f"family must be I or K, got {cfg.family!r}", "family")
    if any(not 1e-13 <= t <= 1e-3 for t in cfg.target):
        bad(f"targets must lie in [1e-13, 1e-3], got {cfg.target}", "target")
    if cfg.threads < 1:
        bad(f"threads must be >= 1, got {cfg.threads}", "threads")
    if cfg.format not in ("csv", "kv", "bin"):
        bad(f"format must be csv or kv, got {cfg.format!r}", "format")
    if (cfg.step is None) != (cfg.N0 is None) or (cfg.step is None) != (cfg.N1 is None):
        bad("step, N0 and N1 must be given together", "step", "N0", "N1")
    if cfg.step is not None and (not cfg.step > 0 or cfg.N1 < cfg.N0):
        bad(f"invalid rule step={cfg.step}, N0={cfg.N0}, N1={cfg.N1}", "step", "N0", "N1")
    if cfg.command == "convergence" and len(cfg.h) < 2:
        bad("a convergence study needs at least two grid steps", "h")
    if cfg.command in ("newton-table", "convergence") and min(cfg.n) < 3:
        bad("the Newton potential needs n >= 3", "n")
    if cfg.command == "newton-table" and cfg.kind != "newton":
        bad("newton-table only supports kind=newton", "kind")
    if cfg.tau and len(cfg.tau) != len(cfg.h):
        bad("tau ladder must have the same length as the h ladder", "tau", "h")
    b2 = sum(v * v for v in cfg.b) * (3 if len(cfg.b) == 1 else 1)
    if any(c + b2 < 0 for c in cfg.c):
        bad("c + |b|^2 must be nonnegative", "c", "b")


def _drift(cfg: ExperimentConfig, n: int) -> tuple:
    if len(cfg.b) == 1:
        return tuple(cfg.b) * n
    if len(cfg.b) != n:
        raise ConfigError(f"config: drift b has {len(cfg.b)} components, dimension is {n}")
    return tuple(cfg.b)


@dataclass(frozen=True)
class ReportRow:
    point: str
    exact: float
    approx: float
    abs_err: float
    rel_err: float
    rate: float | None = None
    wall_time: float | None = None
    build_time: float | None = None
    flags: str = ""

    @classmethod
    def make(cls, point, exact, approx, **kw) -> "ReportRow":
        err = abs(approx - exact)
        rel = err / abs(exact) if exact != 0 else (0.0 if err == 0 else math.inf)
        return cls(point, float(exact), float(approx), err, rel, **kw)


@dataclass(frozen=True)
class TuneRow:
    family: str
    n: int
    substitution: str
    target: float
    step: float
    N0: int
    N1: int
    nodes: int
    achieved: float
    wall_time: float | None = None


def _newton_rule(cfg: ExperimentConfig):
    preset = PRESETS[cfg.preset]
    sub = preset.sub
    if len(cfg.sub) == 2:
        sub = WaldvogelTriple(*cfg.sub)
    rule = preset.rule
    if cfg.step is not None:
        rule = TrapezoidRule(cfg.step, cfg.N0, cfg.N1)
    return sub, rule


def _potential(density: str, n: int, x1: float) -> float:
    x = np.zeros(n)
    x[0] = x1
    if density == "u1":
        return float(kn.exact_u1_potential(n, x))
    return float(kn.exact_u2_potential(n, x)[()])


def _newton_rows(cfg: ExperimentConfig, n: int, h: float, sub, rule):
    t0 = time.perf_counter()
    grid = GridSpec.cube(h, cfg.A)
    params = kn.CubatureParams(n, h, cfg.D, cfg.M)
    kernel = build_kernel("newton", params, newton_nodes(sub, rule), grid.m_max - grid.m_min, threads=cfg.threads)
    density = sample_density(cfg.density, grid, n)
    build = time.perf_counter() - t0
    rows = []
    for x1 in cfg.points:
        k = int(round(x1 / h))
        t1 = time.perf_counter()
        res = evaluate(kernel, density, [axis_point(n, k)], threads=cfg.threads, return_flags=True)
        wall = time.perf_counter() - t1
        exact = _potential(cfg.density, n, k * h)
        rows.append(ReportRow.make(
            f"n={n};h={h!r};x1={k * h!r}", exact, res.values[0],
            wall_time=wall, build_time=build, flags="underflow" if res.underflow[0] else "",
        ))
    return rows


def run_newton_table(cfg: ExperimentConfig) -> list:
    """Exact and cubature values of the Newton potential at ``(x1, 0, ..., 0)``."""
    sub, rule = _newton_rule(cfg)
    rows = []
    for n in cfg.n:
        for h in cfg.h:
            rows.extend(_newton_rows(cfg, n, h, sub, rule))
    return rows


def convergence_rates(errors: Sequence[float]) -> list:
    """``log2(e_h / e_{h/2})`` for consecutive entries; None for the first."""
    rates = [None]
    for a, b in zip(errors, errors[1:]):
        rates.append(math.log2(a / b) if a > 0 and b > 0 else None)
    return rates


def run_convergence(cfg: ExperimentConfig) -> list:
    """Errors along an h ladder with observed rates.

    A row is flagged ``pre-asymptotic`` when its rate is more than one away
    from the nominal order ``2M`` (for instance when the error sits on the
    saturation plateau), but it is still reported.
    """
    sub, rule = _newton_rule(cfg)
    rows = []
    for n in cfg.n:
        for x1 in cfg.points:
            level = [_newton_rows(replace(cfg, points=(x1,)), n, h, sub, rule)[0] for h in cfg.h]
            rates = convergence_rates([r.abs_err for r in level])
            for r, rate in zip(level, rates):
                flag = r.flags
                if rate is not None and abs(rate - 2 * cfg.M) > 1.0:
                    flag = ";".join(f for f in (flag, "pre-asymptotic") if f)
                rows.append(replace(r, rate=rate, flags=flag))
    return rows


def _tune_substitution(cfg: ExperimentConfig):
    if cfg.family == "K":
        b = cfg.sub[-1] if cfg.sub else 1.0
        return SingleExp(b), f"single:b={b!r}"
    a, b = cfg.sub if len(cfg.sub) == 2 else (1.0, 1.0)
    return WaldvogelTriple(a, b), f"waldvogel:a={a!r};b={b!r}"


def run_tune(cfg: ExperimentConfig) -> list:
    """One tuned rule per (dimension, a2, target)."""
    sub, label = _tune_substitution(cfg)
    rng = np.random.default_rng(cfg.seed) if cfg.seed is not None else None
    rows = []
    damping = cfg.a2 if cfg.family == "K" else (None,)
    for n in cfg.n:
        for a2 in damping:
            family = NewtonIntegrand(n, cfg.M) if a2 is None else HelmholtzIntegrand(n, a2, cfg.M)
            name = f"I{cfg.M}" if a2 is None else f"K{cfg.M}:a2={a2!r}"
            probes = family.default_probes(cfg.K, rng=rng, extra=8 if rng is not None else 0)
            for target in cfg.target:
                t0 = time.perf_counter()
                res = tune(family, sub, target, K=cfg.K, probes=probes, budget=cfg.budget)
                rows.append(TuneRow(name, n, label, target, res.rule.step, res.rule.N0, res.rule.N1,
                                    res.node_count, res.achieved_error, time.perf_counter() - t0))
    return rows


def run_advdiff(cfg: ExperimentConfig) -> list:
    """Advection-diffusion potentials of ``exp(-|x|**2)`` in three dimensions.

    Each reaction ``c`` gets a single-exponential rule tuned for the points
    requested; its values are compared with the closed form.  With
    ``cubature = true``, cubature values on ``u1`` for each grid step follow.
    """
    n = 3
    b = _drift(cfg, n)
    sub = SingleExp(cfg.sub[-1] if cfg.sub else 1.0)
    radius = max(max(abs(p) for p in cfg.points), 1e-3) + math.sqrt(sum(v * v for v in b))
    rows = []
    target = min(cfg.target)
    for c in cfg.c:
        lam2 = c + sum(v * v for v in b)
        if not lam2 > 0:
            raise ConfigError("config: the closed form needs c + |b|^2 > 0")
        t0 = time.perf_counter()
        if any(b):
            # drift: fixed generous rule, the tuner's families are drift-free
            rule = TrapezoidRule(0.05, -120, 160)
        else:
            family = HelmholtzIntegrand(n, c, 1)
            rule = tune(family, sub, target, probes=radial_probes(n, radius), norm="pointwise",
                        budget=cfg.budget).rule
        nodes = advdiff_nodes(sub, rule, c)
        build = time.perf_counter() - t0
        for x1 in cfg.points:
            x = np.array([x1, 0.0, 0.0])
            t1 = time.perf_counter()
            approx = gaussian_potential(nodes, x, 1, b)
            rows.append(ReportRow.make(
                f"c={c!r};nodes={rule.count};x1={x1!r}", kn.advdiff_exact_n3(b, c, x), approx,
                wall_time=time.perf_counter() - t1, build_time=build,
            ))
    if cfg.cubature:
        rows.extend(_advdiff_cubature_rows(cfg, b))
    return rows


def _advdiff_cubature_rows(cfg: ExperimentConfig, b: tuple) -> list:
    n = 3
    sub, rule = PRESETS["fine-a6b5"].sub, PRESETS["fine-a6b5"].rule
    rows = []
    for c in cfg.c:
        for h in cfg.h:
            t0 = time.perf_counter()
            grid = GridSpec.cube(h, cfg.A)
            params = kn.CubatureParams(n, h, cfg.D, cfg.M)
            nodes = advdiff_nodes(sub, rule, cfg.D * h * h * c)
            kernel = build_kernel("advdiff", params, nodes, grid.m_max - grid.m_min,
                                  advdiff=kn.AdvectionDiffusionParams(b, c), threads=cfg.threads)
            density = sample_density("u1", grid, n)
            build = time.perf_counter() - t0
            for x1 in cfg.points:
                k = int(round(x1 / h))
                t1 = time.perf_counter()
                approx = evaluate(kernel, density, [axis_point(n, k)])[0]
                exact = kn.advdiff_exact_n3(b, c, np.array([k * h, 0.0, 0.0]))
                rows.append(ReportRow.make(f"cubature;c={c!r};h={h!r};x1={k * h!r}", exact, approx,
                                           wall_time=time.perf_counter() - t1, build_time=build))
    return rows


def run_heat(cfg: ExperimentConfig) -> list:
    """Manufactured-solution errors at ``t = T`` with joint (h, tau) rates."""
    taus = cfg.tau or cfg.h
    rows = []
    for n in cfg.n:
        per_point = {x1: [] for x1 in cfg.points}
        for h, tau in zip(cfg.h, taus):
            t0 = time.perf_counter()
            p = HeatParams(nu=cfg.nu, D0=cfg.D0, tau=tau, T=cfg.T, M=cfg.M, D=cfg.D, h=h, n=n)
            grid = GridSpec.cube(h, cfg.A)
            density = manufactured_density(p, grid)
            ell = int(round(cfg.T / tau))
            rule = tune_heat_rule(p, [tau * ell], budget=cfg.budget).rule
            build = time.perf_counter() - t0
            for x1 in cfg.points:
                k = int(round(x1 / h))
                t1 = time.perf_counter()
                res = heat_solve(density, p, [(axis_point(n, k), ell)], rule=rule)
                x = np.zeros(n)
                x[0] = k * h
                exact = float(manufactured_solution(x, tau * ell))
                per_point[x1].append(ReportRow.make(
                    f"n={n};h={h!r};tau={tau!r};x1={k * h!r}", exact, res.values[0],
                    wall_time=time.perf_counter() - t1, build_time=build,
                    flags="clipped" if res.clipped[0] else "",
                ))
        for level in per_point.values():
            rates = convergence_rates([r.abs_err for r in level])
            rows.extend(replace(r, rate=rate) for r, rate in zip(level, rates))
    return rows
