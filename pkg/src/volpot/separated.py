"""Rank-R separated kernels and their evaluation on separated densities.

A kernel is a list of quadrature weights ``w_l`` and sampled one-dimensional
factor tables ``F_l[m]``, ``|m| <= m_max``.  Applied to a separated density
the cubature becomes

    f(h k) = sum_q r_q sum_l w_l prod_j s * (F_l * u_qj)[k_j]

where ``*`` is a discrete convolution and ``s`` is a per-dimension scale.
Dimensions sharing the same samples and the same evaluation index are
collapsed into one convolution raised to a multiplicity, and the product is
accumulated as a sign plus a log-magnitude, so ``n = 10**5`` costs no more
than ``n = 3``.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .kernels import (
    AdvectionDiffusionParams,
    CubatureParams,
    advdiff_factor,
    g_newton,
    heat_factor,
)
from .quadrature import QuadratureNodeSet

__all__ = [
    "SignedLogValue",
    "GridSpec",
    "SeparatedKernel",
    "DensityGroup",
    "DensityTerm",
    "SeparatedDensity",
    "axis_point",
    "build_kernel",
    "conv1d",
    "evaluate",
    "EvaluationResult",
    "sample_density",
    "gaussian_potential",
    "write_kernel",
    "read_kernel",
    "kernel_csv",
    "KIND_CODES",
]

KIND_CODES = {"newton": 0, "advdiff": 1, "heat": 2}


@dataclass(frozen=True)
class SignedLogValue:
    """A real number ``sign * exp(log_mag)``; `log_mag` is ignored when sign is 0."""

    sign: int
    log_mag: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if self.sign == 0:
            object.__setattr__(self, "log_mag", -math.inf)

    @classmethod
    def from_float(cls, x: float) -> "SignedLogValue":
        if x == 0:
            return cls(0)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue(0)
        return SignedLogValue(self.sign * other.sign, self.log_mag + other.log_mag)

    def __pow__(self, k: int) -> "SignedLogValue":
        if k < 0 or int(k) != k:
            raise ValueError("only nonnegative integer powers are supported")
        if k == 0:
            return SignedLogValue(1, 0.0)
        if self.sign == 0:
            return self
        return SignedLogValue(self.sign**k, k * self.log_mag)

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_mag)
        except OverflowError:
            return self.sign * math.inf


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``h m``, ``m_min <= m <= m_max``, in every dimension."""

    h: float
    m_min: int
    m_max: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        if self.m_min > self.m_max:
            raise ValueError(f"need m_min <= m_max, got {self.m_min} > {self.m_max}")

    @classmethod
    def cube(cls, h: float, A: float) -> "GridSpec":
        """Grid covering ``[-A, A]``."""
        m = int(round(A / h))
        return cls(h, -m, m)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)

    @property
    def coords(self) -> np.ndarray:
        return self.h * self.indices

    @property
    def size(self) -> int:
        return self.m_max - self.m_min + 1


@dataclass(frozen=True)
class SeparatedKernel:
    """Weights and sampled per-dimension factors of a separated kernel.

    ``tables[key]`` is an ``R x (2 m_max + 1)`` array, row ``l`` holding
    ``F_l[-m_max..m_max]``.  Drift-free kernels have a single key ``0.0``;
    advection-diffusion kernels have one key per distinct drift component.
    ``dim_scale`` multiplies every one-dimensional convolution.
    """

    kind: str
    params: object
    nodes: QuadratureNodeSet
    weights: np.ndarray
    tables: dict
    m_max: int
    h: float
    dim_scale: float = 1.0
    drift: tuple | None = None

    @property
    def rank(self) -> int:
        return self.weights.size

    def table_for(self, dims: range) -> np.ndarray:
        """Factor table shared by the dimensions in `dims`."""
        if self.drift is None:
            return self.tables[0.0]
        vals = {self.drift[j] for j in dims}
        if len(vals) != 1:
            raise ValueError(f"dimensions {dims.start}..{dims.stop - 1} have different drift components")
        return self.tables[vals.pop()]


def _readonly(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def build_kernel(
    kind: str,
    params,
    quad: QuadratureNodeSet,
    m_max: int,
    advdiff: AdvectionDiffusionParams | None = None,
    threads: int = 1,
) -> SeparatedKernel:
    """Sample the per-dimension factors of a cubature kernel.

    Parameters
    ----------
    kind : {"newton", "advdiff", "heat"}
    params : CubatureParams, or HeatParams for ``kind="heat"``
    quad : QuadratureNodeSet
        Newton: nodes from :func:`~volpot.quadrature.newton_nodes`.
        Advection-diffusion: nodes from :func:`~volpot.quadrature.advdiff_nodes`
        built with the scaled reaction ``D h**2 c``.  Heat: nodes in ``lam``
        for one evaluation time.
    m_max : int
        Table half-length in grid units; must cover the largest offset ``k - m``.
    advdiff : AdvectionDiffusionParams, optional
        Drift and reaction for ``kind="advdiff"`` (physical scale).
    """
    if m_max < 0:
        raise ValueError(f"m_max must be nonnegative, got {m_max}")
    offsets = np.arange(-m_max, m_max + 1, dtype=float)
    t = quad.t
    drift = None

    if kind == "newton":
        p = _check_cubature(params)
        x = offsets / math.sqrt(p.D)
        rows = _rows(lambda tl: g_newton(p.M, x, tl) / math.sqrt(1.0 + tl), t, threads)
        tables = {0.0: rows}
        weights = quad.w * p.D * p.h**2
        dim_scale = 1.0 / math.sqrt(math.pi * p.D)
        h = p.h
    elif kind == "advdiff":
        p = _check_cubature(params)
        if advdiff is None:
            raise ValueError("advection-diffusion kernel needs AdvectionDiffusionParams")
        if len(advdiff.b) != p.n:
            raise ValueError(f"drift has {len(advdiff.b)} components, dimension is {p.n}")
        x = offsets / math.sqrt(p.D)
        eps = math.sqrt(p.D) * p.h
        tables = {}
        for bj in sorted(set(advdiff.b)):
            tables[bj] = _rows(
                lambda tl, bj=bj: advdiff_factor(p.M, x, tl, eps * bj) / math.sqrt(1.0 + 2.0 * tl),
                t,
                threads,
            )
        drift = advdiff.b
        weights = quad.w * p.D * p.h**2
        dim_scale = 1.0 / math.sqrt(math.pi * p.D)
        h = p.h
    elif kind == "heat":
        p = params
        dx = offsets * p.h
        rows = _rows(lambda lam: p.h * heat_factor(p.M, dx, lam, p.D, p.h, p.nu) / math.sqrt(math.pi), t, threads)
        tables = {0.0: rows}
        weights = quad.w
        dim_scale = 1.0
        h = p.h
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")

    return SeparatedKernel(
        kind=kind,
        params=params,
        nodes=quad,
        weights=_readonly(weights),
        tables={k: _readonly(v) for k, v in tables.items()},
        m_max=int(m_max),
        h=float(h),
        dim_scale=dim_scale,
        drift=drift,
    )


def _check_cubature(params) -> CubatureParams:
    if not isinstance(params, CubatureParams):
        raise TypeError(f"expected CubatureParams, got {type(params).__name__}")
    return params


def _rows(row: Callable[[float], np.ndarray], t: np.ndarray, threads: int) -> np.ndarray:
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return np.array(list(pool.map(row, t)))
    return np.array([row(tl) for tl in t])


def conv1d(factor: np.ndarray, density: np.ndarray, k: int, m_min: int = 0) -> float:
    """``sum_m F[k - m] density[m]`` by direct summation in ascending `m`.

    `factor` covers offsets ``-m_max..m_max`` and `density` covers indices
    ``m_min, m_min + 1, ...``; terms whose offset falls outside the table
    count as zero.
    """
    factor = np.asarray(factor, dtype=float)
    m_max = (factor.size - 1) // 2
    total = 0.0
    for i, dm in enumerate(np.asarray(density, dtype=float)):
        off = k - (m_min + i)
        if -m_max <= off <= m_max:
            total += factor[off + m_max] * dm
    return total


def _conv_all(table: np.ndarray, samples: np.ndarray, k: int, m_min: int, m_max: int) -> np.ndarray:
    # conv1d for every row of `table` at once
    m = np.arange(m_min, m_min + samples.size)
    off = k - m
    ok = np.abs(off) <= m_max
    if not ok.any():
        return np.zeros(table.shape[0])
    cols = table[:, off[ok] + m_max]
    return cols @ samples[ok]


@dataclass(frozen=True)
class DensityGroup:
    """One-dimensional samples on the grid, shared by `multiplicity` dimensions."""

    samples: np.ndarray
    multiplicity: int

    def __post_init__(self):
        object.__setattr__(self, "samples", _readonly(self.samples))
        if self.samples.ndim != 1:
            raise ValueError("density samples must be one-dimensional")
        if self.multiplicity < 1 or int(self.multiplicity) != self.multiplicity:
            raise ValueError(f"multiplicity must be a positive integer, got {self.multiplicity!r}")


@dataclass(frozen=True)
class DensityTerm:
    """``coef * prod_groups prod_dims samples``.

    Groups occupy consecutive dimensions in order.  With ``symmetric=True``
    the term stands for the sum over all distinct arrangements of its groups
    among the dimensions; for groups ``(a, 1), (b, n-1)`` that is
    ``sum_j a(x_j) prod_{i != j} b(x_i)``.
    """

    coef: float
    groups: tuple
    symmetric: bool = False

    def __post_init__(self):
        groups = tuple(g if isinstance(g, DensityGroup) else DensityGroup(*g) for g in self.groups)
        if not groups:
            raise ValueError("a density term needs at least one group")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "coef", float(self.coef))

    @property
    def n(self) -> int:
        return sum(g.multiplicity for g in self.groups)


@dataclass(frozen=True)
class SeparatedDensity:
    """Sum of separated terms sampled on `grid`."""

    terms: tuple
    grid: GridSpec

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise ValueError("a separated density needs at least one term")
        dims = {t.n for t in terms}
        if len(dims) != 1:
            raise ValueError(f"terms disagree on the dimension: {sorted(dims)}")
        for t in terms:
            for g in t.groups:
                if g.samples.size != self.grid.size:
                    raise ValueError("density samples do not match the grid index range")

    @property
    def n(self) -> int:
        return self.terms[0].n

    @property
    def rank(self) -> int:
        return len(self.terms)

    def scaled(self, factor: float) -> "SeparatedDensity":
        return SeparatedDensity(
            tuple(DensityTerm(factor * t.coef, t.groups, t.symmetric) for t in self.terms), self.grid
        )


def axis_point(n: int, *leading: int) -> tuple:
    """Grid point ``(leading..., 0, ..., 0)`` as ``(index, multiplicity)`` blocks."""
    if len(leading) > n:
        raise ValueError(f"{len(leading)} coordinates given for dimension {n}")
    blocks = tuple((int(k), 1) for k in leading)
    if n > len(leading):
        blocks += ((0, n - len(leading)),)
    return blocks


def _normalize_point(point, n: int) -> tuple:
    if isinstance(point, (int, np.integer)):
        raise TypeError("a point must be a sequence of (index, multiplicity) blocks")
    blocks = []
    for b in point:
        if isinstance(b, (int, np.integer)):
            blocks.append((int(b), 1))
        else:
            k, c = b
            blocks.append((int(k), int(c)))
    if sum(c for _, c in blocks) != n:
        raise ValueError(f"point {point} does not have {n} coordinates")
    return tuple(blocks)


def _ranges(sizes) -> list:
    out, start = [], 0
    for s in sizes:
        out.append(range(start, start + s))
        start += s
    return out


def _contingency(rows: Sequence[int], cols: Sequence[int]) -> Iterator[list]:
    """All nonnegative integer matrices with the given row and column sums."""
    rows = list(rows)
    cols = list(cols)
    if not rows:
        if all(c == 0 for c in cols):
            yield []
        return
    first, rest = rows[0], rows[1:]

    def splits(j, left):
        # ways to place `left` items into columns j.. without exceeding them
        if j == len(cols) - 1:
            if left <= cols[j]:
                yield [left]
            return
        tail_cap = sum(cols[j + 1:])
        for v in range(max(0, left - tail_cap), min(cols[j], left) + 1):
            for tail in splits(j + 1, left - v):
                yield [v] + tail

    for row in splits(0, first):
        new_cols = [c - v for c, v in zip(cols, row)]
        for tail in _contingency(rest, new_cols):
            yield [row] + tail


class EvaluationResult(NamedTuple):
    values: np.ndarray
    underflow: np.ndarray


def _term_logs(kernel: SeparatedKernel, term: DensityTerm, blocks: tuple, grid: GridSpec, cache: dict):
    """Signs and log-magnitudes per node of one term at one point."""
    R = kernel.rank
    log_scale = math.log(kernel.dim_scale)
    block_ranges = _ranges(c for _, c in blocks)

    def conv(gi, bi, dims):
        key = (id(term), gi, blocks[bi][0], kernel.drift is None or kernel.drift[dims.start])
        if key not in cache:
            table = kernel.table_for(dims)
            cache[key] = _conv_all(table, term.groups[gi].samples, blocks[bi][0], grid.m_min, kernel.m_max)
        return cache[key]

    if not term.symmetric:
        group_ranges = _ranges(g.multiplicity for g in term.groups)
        parts = []
        for gi, gr in enumerate(group_ranges):
            for bi, br in enumerate(block_ranges):
                lo, hi = max(gr.start, br.start), min(gr.stop, br.stop)
                if lo < hi:
                    parts.extend((gi, bi, r) for r in _drift_runs(kernel, range(lo, hi)))
        return _product(parts, conv, R, log_scale, 0.0)

    if kernel.drift is not None and len(set(kernel.drift)) > 1:
        raise ValueError("symmetric density terms need a drift that is the same in every dimension")

    # symmetric: sum over group-by-block count tables
    g_sizes = [g.multiplicity for g in term.groups]
    b_sizes = [c for _, c in blocks]
    signs, logs = [], []
    for table in _contingency(g_sizes, b_sizes):
        parts = []
        log_count = 0.0
        for bi, br in enumerate(block_ranges):
            log_count += math.lgamma(b_sizes[bi] + 1)
            for gi in range(len(g_sizes)):
                cnt = table[gi][bi]
                if cnt:
                    log_count -= math.lgamma(cnt + 1)
                    parts.append((gi, bi, range(br.start, br.start + cnt)))
        s, lv = _product(parts, conv, R, log_scale, log_count)
        signs.append(s)
        logs.append(lv)
    signs = np.array(signs)
    logs = np.array(logs)
    order = np.argsort(logs, axis=0, kind="stable")
    logs = np.take_along_axis(logs, order, axis=0)
    signs = np.take_along_axis(signs, order, axis=0)
    with np.errstate(divide="ignore"):
        lv, s = logsumexp(logs, axis=0, b=signs, return_sign=True)
    return s, lv


def _drift_runs(kernel: SeparatedKernel, dims: range) -> list:
    # split `dims` into maximal runs sharing one drift component
    if kernel.drift is None:
        return [dims]
    runs, start = [], dims.start
    for j in range(dims.start + 1, dims.stop):
        if kernel.drift[j] != kernel.drift[start]:
            runs.append(range(start, j))
            start = j
    runs.append(range(start, dims.stop))
    return runs


def _product(parts, conv, R, log_scale, log_count):
    sign = np.ones(R)
    pieces = [np.full(R, log_count)]
    for gi, bi, dims in parts:
        v = conv(gi, bi, dims)
        cnt = len(dims)
        sign = sign * np.sign(v) ** (cnt % 2) * (np.sign(v) != 0)
        with np.errstate(divide="ignore"):
            pieces.append(cnt * (np.log(np.abs(v)) + log_scale))
    stacked = np.sort(np.array(pieces), axis=0)  # order-independent accumulation
    logs = np.array([math.fsum(col) if np.all(np.isfinite(col)) else -math.inf for col in stacked.T])
    logs = np.where(sign == 0, -np.inf, logs)
    return sign, logs


def evaluate(
    kernel: SeparatedKernel,
    density: SeparatedDensity,
    points: Sequence,
    grid: GridSpec | None = None,
    threads: int = 1,
    return_flags: bool = False,
):
    """Cubature values at grid points.

    Parameters
    ----------
    kernel : SeparatedKernel
    density : SeparatedDensity
    points : sequence
        Each point is a tuple of ``(index, multiplicity)`` blocks covering
        the dimensions in order, e.g. ``axis_point(n, k1)``.
    grid : GridSpec, optional
        Defaults to ``density.grid``; must agree with the kernel step.
    threads : int
        Points are evaluated concurrently; results do not depend on it.
    return_flags : bool
        Also return a mask of points whose value underflowed to exactly 0.

    Returns
    -------
    ndarray, or EvaluationResult when `return_flags` is set
    """
    grid = density.grid if grid is None else grid
    if grid != density.grid:
        raise ValueError("density was sampled on a different grid")
    if not math.isclose(grid.h, kernel.h, rel_tol=1e-12):
        raise ValueError(f"kernel step {kernel.h} differs from grid step {grid.h}")
    n = density.n
    if kernel.drift is not None and len(kernel.drift) != n:
        raise ValueError("kernel drift length differs from the density dimension")
    span = grid.m_max - grid.m_min
    if kernel.m_max < span:
        raise ValueError(f"kernel half-length {kernel.m_max} is shorter than the grid extent {span}")
    pts = [_normalize_point(p, n) for p in points]
    for p in pts:
        for k, _ in p:
            if not grid.m_min <= k <= grid.m_max:
                raise ValueError(f"point index {k} outside grid [{grid.m_min}, {grid.m_max}]")

    log_w = np.log(kernel.weights.astype(float) * np.sign(kernel.weights) + (kernel.weights == 0))
    sign_w = np.sign(kernel.weights)

    def one(blocks):
        cache: dict = {}
        signs, logs = [], []
        for term in density.terms:
            if term.coef == 0:
                continue
            s, lv = _term_logs(kernel, term, blocks, grid, cache)
            signs.append(s * sign_w * math.copysign(1.0, term.coef))
            logs.append(lv + log_w + math.log(abs(term.coef)))
        if not signs:
            return 0.0, False
        signs = np.concatenate(signs)
        logs = np.concatenate(logs)
        with np.errstate(divide="ignore"):
            lv, s = logsumexp(logs, b=signs, return_sign=True)
        if s == 0 or not np.isfinite(lv):
            return 0.0, bool(np.any(signs != 0))
        value = float(s) * math.exp(min(lv, 709.0)) if lv <= 709.0 else float(s) * math.inf
        return value, value == 0.0

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            res = list(pool.map(one, pts))
    else:
        res = [one(p) for p in pts]
    values = np.array([r[0] for r in res])
    if return_flags:
        return EvaluationResult(values, np.array([r[1] for r in res]))
    return values


def sample_density(spec, grid: GridSpec, n: int) -> SeparatedDensity:
    """Sample a closed-form density on `grid`.

    `spec` is ``"u1"`` (``exp(-|x|**2)``), ``"u2"`` (its Laplacian, as one
    symmetric term with groups ``(4x**2 - 2) exp(-x**2)`` and
    ``exp(-x**2)`` of multiplicity ``n - 1``) or a callable giving the
    one-dimensional factor of a rank-one product.
    """
    x = grid.coords
    gauss = np.exp(-x * x)
    if callable(spec):
        groups = ((np.asarray(spec(x), dtype=float), n),)
        return SeparatedDensity((DensityTerm(1.0, groups),), grid)
    if spec == "u1":
        return SeparatedDensity((DensityTerm(1.0, ((gauss, n),)),), grid)
    if spec == "u2":
        special = (4 * x * x - 2) * gauss
        if n == 1:
            return SeparatedDensity((DensityTerm(1.0, ((special, 1),)),), grid)
        groups = ((special, 1), (gauss, n - 1))
        return SeparatedDensity((DensityTerm(1.0, groups, symmetric=True),), grid)
    raise ValueError(f"unknown density {spec!r}")


def gaussian_potential(quad: QuadratureNodeSet, x, M: int = 1, b=None) -> float:
    """Potential of ``prod_j eta~_M(x_j)`` by the separated quadrature alone.

    Newton nodes (``b is None``) give ``sum_l w_l (1+t_l)**(-n/2) prod g_M(x_j, t_l)``;
    with a drift `b`, `quad` must come from :func:`~volpot.quadrature.advdiff_nodes`
    and the factors are ``advdiff_factor``.  For ``M = 1`` this is the
    potential of ``exp(-|x|**2)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    t = quad.t
    if b is None:
        logs = -0.5 * n * np.log1p(t)
        sign = np.ones_like(t)
        for xj in x:
            g = g_newton(M, xj, t)
            sign *= np.sign(g)
            with np.errstate(divide="ignore"):
                logs = logs + np.log(np.abs(g))
    else:
        b = np.asarray(b, dtype=float)
        logs = -0.5 * n * np.log1p(2 * t)
        sign = np.ones_like(t)
        for xj, bj in zip(x, b):
            g = advdiff_factor(M, xj, t, bj)
            sign *= np.sign(g)
            with np.errstate(divide="ignore"):
                logs = logs + np.log(np.abs(g))
    vals = quad.w * sign * np.exp(logs)
    return math.fsum(vals.tolist())


_HEADER = struct.Struct("<iiiddii")


def write_kernel(kernel: SeparatedKernel, path) -> None:
    """Binary export: header ``(kind, M, n, h, D, R, m_max)`` then, per factor
    table (one for drift-free kernels, one per distinct drift value in
    ascending order otherwise), R records of ``weight`` followed by the
    ``2 m_max + 1`` factor values, all little-endian float64."""
    p = kernel.params
    n = getattr(p, "n", 0)
    header = _HEADER.pack(KIND_CODES[kernel.kind], int(p.M), int(n), float(p.h), float(p.D), kernel.rank, kernel.m_max)
    with open(path, "wb") as fh:
        fh.write(header)
        for key in sorted(kernel.tables):
            block = np.column_stack([kernel.weights, kernel.tables[key]]).astype("<f8")
            fh.write(block.tobytes())


def read_kernel(path) -> tuple:
    """Inverse of :func:`write_kernel`: ``(header dict, weights, list of tables)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    kind, M, n, h, D, R, m_max = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    width = 2 * m_max + 2
    if body.size % (R * width):
        raise ValueError("kernel file is truncated or malformed")
    blocks = body.reshape(-1, R, width)
    names = {v: k for k, v in KIND_CODES.items()}
    header = dict(kind=names[kind], M=M, n=n, h=h, D=D, R=R, m_max=m_max)
    return header, blocks[0, :, 0].copy(), [b[:, 1:].copy() for b in blocks]


def kernel_csv(kernel: SeparatedKernel) -> str:
    """Plain-text dump: one line per node with node, weight and factors."""
    lines = ["# node,weight,factors[-m_max..m_max]"]
    for key in sorted(kernel.tables):
        if kernel.drift is not None:
            lines.append(f"# drift={key:.13e}")
        for tl, wl, row in zip(kernel.nodes.t, kernel.weights, kernel.tables[key]):
            vals = ",".join(f"{v:.13e}" for v in row)
            lines.append(f"{tl:.13e},{wl:.13e},{vals}")
    return "\n".join(lines) + "\n"
