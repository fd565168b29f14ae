"""Command-line entry point: ``volpot <command> [--flags]``.

Exit codes: 0 success, 2 configuration error, 3 tuner budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import sys

from . import kernels as kn
from .experiments import (
    COMMANDS,
    ConfigError,
    ExperimentConfig,
    ReportRow,
    TuneRow,
    _newton_rule,
    load_config,
    parse_pairs,
    read_config_file,
    run_advdiff,
    run_convergence,
    run_heat,
    run_newton_table,
    run_tune,
)
from .quadrature import TunerBudgetExceeded, newton_nodes
from .separated import GridSpec, build_kernel, kernel_csv, write_kernel

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3

#: flag name -> config key
_FLAGS = {
    "n": "n", "h": "h", "M": "M", "D": "D", "A": "A", "sub": "sub", "target": "target",
    "threads": "threads", "seed": "seed", "format": "format", "out": "out",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volpot", description="Separated cubature of volume potentials.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "kv", "bin") if name == "export-kernel" else ("csv", "kv"))
        p.add_argument("--threads")
        p.add_argument("--seed", help="seed for extra random probe points")
        for flag in ("n", "h", "M", "D", "A", "sub", "target"):
            p.add_argument(f"--{flag}")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    file_values, origins = {}, {}
    if args.config:
        file_values, origins = read_config_file(args.config)
    pairs = []
    for flag, key in _FLAGS.items():
        raw = getattr(args, flag, None)
        if raw is not None:
            pairs.append((0, key, str(raw)))
    over, flag_origins = parse_pairs(pairs, "command line")
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        v, o = parse_pairs([(0, key.strip(), raw.strip())], f"--set {key.strip()}")
        over.update(v)
        flag_origins.update(o)
    for k in over:
        origins[k] = flag_origins.get(k, "command line")
    return load_config(args.command, file_values, over, origins)


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return "%.13e" % v


def _columns(rows, cfg: ExperimentConfig) -> list:
    if rows and isinstance(rows[0], TuneRow):
        names = [f.name for f in dataclasses.fields(TuneRow)]
    else:
        names = [f.name for f in dataclasses.fields(ReportRow)]
    if not cfg.timing:
        names = [n for n in names if n not in ("wall_time", "build_time")]
    return names


def format_rows(rows, cfg: ExperimentConfig) -> str:
    """CSV (default) or key-value text; identical input gives identical bytes."""
    names = _columns(rows, cfg)
    lines = [f"# volpot {cfg.command} {cfg.echo()}"]
    if cfg.format == "kv":
        for i, r in enumerate(rows):
            for name in names:
                v = getattr(r, name)
                lines.append(f"row.{i}.{name} = {v if isinstance(v, str) else _num(v)}")
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for r in rows:
        writer.writerow(getattr(r, n) if isinstance(getattr(r, n), str) else _num(getattr(r, n)) for n in names)
    return "\n".join(lines) + "\n" + buf.getvalue()


def _timing_report(rows) -> None:
    for r in rows:
        label = getattr(r, "point", None) or f"{r.family};n={r.n};target={r.target:g}"
        build = getattr(r, "build_time", None)
        extra = f" build={build:.3f}s" if build is not None else ""
        print(f"# time {label}: {r.wall_time:.4f}s{extra}", file=sys.stderr)


def _export(cfg: ExperimentConfig) -> int:
    if not cfg.out:
        raise ConfigError("export-kernel needs --out")
    n, h = cfg.n[0], cfg.h[0]
    sub, rule = _newton_rule(cfg)
    grid = GridSpec.cube(h, cfg.A)
    kernel = build_kernel("newton", kn.CubatureParams(n, h, cfg.D, cfg.M), newton_nodes(sub, rule),
                          grid.m_max - grid.m_min, threads=cfg.threads)
    if cfg.format == "csv":
        with open(cfg.out, "w") as fh:
            fh.write(f"# volpot export-kernel {cfg.echo()}\n")
            fh.write(kernel_csv(kernel))
    else:
        write_kernel(kernel, cfg.out)
    print(f"wrote {kernel.rank} nodes x {2 * kernel.m_max + 1} factors to {cfg.out}", file=sys.stderr)
    return EXIT_OK


RUNNERS = {
    "newton-table": run_newton_table,
    "convergence": run_convergence,
    "tune-quad": run_tune,
    "advdiff": run_advdiff,
    "heat": run_heat,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config_from_args(args)
        if cfg.command == "export-kernel":
            return _export(cfg)
        rows = RUNNERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except kn.DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TunerBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    text = format_rows(rows, cfg)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not cfg.timing:
        _timing_report(rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
