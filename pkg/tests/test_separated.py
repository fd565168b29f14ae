import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volpot.kernels import (
    AdvectionDiffusionParams,
    CubatureParams,
    advdiff_exact_n3,
    exact_u2,
    exact_u2_potential,
    newton_gaussian_exact,
)
from volpot.quadrature import PRESETS, QuadratureNodeSet, advdiff_nodes, newton_nodes
from volpot.separated import (
    DensityGroup,
    DensityTerm,
    GridSpec,
    SeparatedDensity,
    SignedLogValue,
    _conv_all,
    axis_point,
    build_kernel,
    conv1d,
    evaluate,
    kernel_csv,
    read_kernel,
    sample_density,
    write_kernel,
)


def newton_setup(n, M=4, h=0.05, D=3.5, A=6.0, preset="wide-a2b2"):
    grid = GridSpec.cube(h, A)
    nodes = newton_nodes(PRESETS[preset].sub, PRESETS[preset].rule)
    kernel = build_kernel("newton", CubatureParams(n, h, D, M), nodes, grid.m_max - grid.m_min)
    return grid, kernel


@pytest.fixture(scope="module")
def small():
    # coarse kernel shared by the property tests
    return newton_setup(3, M=2, h=0.2, D=3.0, A=4.0)


class TestSignedLogValue:
    def test_roundtrip(self):
        for x in (-3.5, 0.0, 1e-300, 2.0):
            assert float(SignedLogValue.from_float(x)) == pytest.approx(x, rel=1e-15)

    def test_products(self):
        a = SignedLogValue.from_float(-2.0)
        b = SignedLogValue.from_float(3.0)
        assert float(a * b) == pytest.approx(-6.0)
        assert float(a**3) == pytest.approx(-8.0)
        assert float(SignedLogValue.from_float(0.0) * b) == 0.0

    def test_million_factors(self):
        v = SignedLogValue.from_float(0.5) ** 1_000_000
        assert v.sign == 1
        assert v.log_mag == pytest.approx(-1_000_000 * math.log(2))
        assert float(v) == 0.0
        big = SignedLogValue.from_float(-1.001) ** 1_000_001
        assert big.sign == -1 and float(big) == -math.inf

    def test_invalid_sign(self):
        with pytest.raises(ValueError):
            SignedLogValue(2, 0.0)


class TestGrid:
    def test_cube(self):
        g = GridSpec.cube(0.05, 6.0)
        assert (g.m_min, g.m_max, g.size) == (-120, 120, 241)
        assert g.coords[0] == pytest.approx(-6.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            GridSpec(0.0, 0, 1)
        with pytest.raises(ValueError):
            GridSpec(0.1, 2, 1)


class TestBuildKernel:
    def test_single_node(self):
        quad = QuadratureNodeSet([0.0], [1.0])
        k = build_kernel("newton", CubatureParams(3, 0.5, 1.0, 1), quad, 1)
        np.testing.assert_allclose(k.tables[0.0][0], np.exp(-np.array([1.0, 0.0, 1.0])), rtol=1e-15)
        assert k.weights[0] == pytest.approx(0.25)  # w D h^2
        assert k.dim_scale == pytest.approx(1 / math.sqrt(math.pi))

    def test_table_length_and_symmetry(self):
        grid, k = newton_setup(3)
        table = k.tables[0.0]
        assert table.shape[1] == 481
        np.testing.assert_array_equal(table, table[:, ::-1])

    def test_factor_bound(self):
        _, k = newton_setup(3, M=1)
        t = k.nodes.t
        assert np.all(np.abs(k.tables[0.0]) <= 1 / np.sqrt(1 + t)[:, None] * (1 + 1e-15))

    def test_tables_read_only(self):
        _, k = newton_setup(3, M=1, h=0.5, A=2.0)
        with pytest.raises(ValueError):
            k.tables[0.0][0, 0] = 1.0

    def test_threads(self):
        nodes = newton_nodes(PRESETS["wide-a2b2"].sub, PRESETS["wide-a2b2"].rule)
        p = CubatureParams(3, 0.1, 3.5, 4)
        a = build_kernel("newton", p, nodes, 60)
        b = build_kernel("newton", p, nodes, 60, threads=4)
        assert a.tables[0.0].tobytes() == b.tables[0.0].tobytes()

    def test_errors(self):
        quad = QuadratureNodeSet([0.0], [1.0])
        p = CubatureParams(3, 0.5, 1.0, 1)
        with pytest.raises(ValueError):
            build_kernel("yukawa", p, quad, 1)
        with pytest.raises(ValueError):
            build_kernel("newton", p, quad, -1)
        with pytest.raises(ValueError):
            build_kernel("advdiff", p, quad, 1)
        with pytest.raises(ValueError):
            build_kernel("advdiff", p, quad, 1, advdiff=AdvectionDiffusionParams((1.0, 0.0), 1.0))


class TestConv1d:
    def test_impulse(self):
        F = np.array([5.0, 7.0, 11.0, 13.0, 17.0])
        assert conv1d(F, [0.0, 1.0, 0.0], 1, m_min=-1) == 13.0
        assert conv1d(F, [1.0], 2) == 17.0

    def test_windowed_sums(self):
        F = np.ones(5)  # offsets -2..2
        got = [conv1d(F, [1.0, 2.0, 3.0], k) for k in range(-3, 6)]
        assert got == [0.0, 1.0, 3.0, 6.0, 6.0, 6.0, 5.0, 3.0, 0.0]

    def test_riemann_oracle(self):
        # h sum exp(-(h(k-m))^2) exp(-(h m)^2) -> sqrt(pi/2) exp(-(hk)^2/2)
        h = 0.25
        m = np.arange(-60, 61)
        F = np.exp(-(h * np.arange(-120, 121)) ** 2)
        u = np.exp(-(h * m) ** 2)
        for k in (-8, 0, 3, 12):
            val = h * conv1d(F, u, k, m_min=-60)
            assert val == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-((h * k) ** 2) / 2), rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(-10, 10), st.integers(-4, 2))
    def test_vectorized_matches_direct(self, k, m_min):
        rng = np.random.default_rng(k + 100)
        table = rng.normal(size=(3, 9))
        samples = rng.normal(size=7)
        got = _conv_all(table, samples, k, m_min, 4)
        want = [conv1d(row, samples, k, m_min) for row in table]
        np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-13)


class TestSampleDensity:
    def test_u1_example(self):
        grid = GridSpec(6.0, -1, 1)
        d = sample_density("u1", grid, 3)
        (term,) = d.terms
        assert term.n == 3 and len(term.groups) == 1
        np.testing.assert_array_equal(term.groups[0].samples, np.exp(-36.0 * np.array([1, 0, 1])))

    def test_u2_decomposition(self):
        n = 5
        grid = GridSpec.cube(0.1, 3.0)
        d = sample_density("u2", grid, n)
        (term,) = d.terms
        assert term.symmetric and [g.multiplicity for g in term.groups] == [1, n - 1]
        special, gauss = (g.samples for g in term.groups)
        rng = np.random.default_rng(5)
        for _ in range(10):
            idx = rng.integers(0, grid.size, size=n)
            total = sum(special[idx[j]] * np.prod(np.delete(gauss[idx], j)) for j in range(n))
            assert total == pytest.approx(exact_u2(n, grid.coords[idx]), rel=1e-13, abs=1e-300)

    def test_callable(self):
        grid = GridSpec.cube(0.5, 1.0)
        d = sample_density(lambda x: 1 + x, grid, 4)
        assert d.terms[0].groups[0].samples.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]

    def test_multiplicities_sum(self):
        grid = GridSpec.cube(0.5, 1.0)
        for spec in ("u1", "u2"):
            for n in (1, 2, 7):
                d = sample_density(spec, grid, n)
                assert all(t.n == n for t in d.terms)

    def test_errors(self):
        grid = GridSpec.cube(0.5, 1.0)
        with pytest.raises(ValueError):
            sample_density("u3", grid, 3)
        with pytest.raises(ValueError):
            SeparatedDensity((DensityTerm(1.0, ((np.ones(3), 2),)),), grid)
        with pytest.raises(ValueError):
            DensityGroup(np.ones(5), 0)


class TestEvaluateNewton:
    def test_origin_value(self):
        grid, kernel = newton_setup(3)
        d = sample_density("u1", grid, 3)
        v = evaluate(kernel, d, [axis_point(3, 0)])[0]
        assert v == pytest.approx(0.49999999923850, abs=2e-9)

    @pytest.mark.parametrize("x1", [0, 1, 2, 3])
    def test_axis_accuracy(self, x1):
        grid, kernel = newton_setup(3)
        d = sample_density("u1", grid, 3)
        k = int(round(x1 / grid.h))
        v = evaluate(kernel, d, [axis_point(3, k)])[0]
        assert v == pytest.approx(newton_gaussian_exact(3, x1), rel=1e-8)

    def test_u2_high_dimension(self):
        grid, kernel = newton_setup(100_000, h=0.025, preset="compact-a2b2")
        d = sample_density("u2", grid, 100_000)
        t0 = time.perf_counter()
        v = evaluate(kernel, d, [axis_point(100_000, 40)])[0]
        assert time.perf_counter() - t0 < 30
        rel = abs(v / exact_u2_potential(3, np.array([1.0, 0, 0])) - 1)
        assert rel == pytest.approx(2.041e-3, rel=0.25)

    def test_point_reflection(self, small):
        grid, kernel = small
        for spec in ("u1", "u2"):
            d = sample_density(spec, grid, 3)
            a = evaluate(kernel, d, [((3, 1), (-2, 1), (5, 1))])[0]
            b = evaluate(kernel, d, [((-3, 1), (2, 1), (-5, 1))])[0]
            assert a == pytest.approx(b, rel=1e-14)

    def test_linearity(self, small):
        grid, kernel = small
        u1 = sample_density("u1", grid, 3)
        u2 = sample_density("u2", grid, 3)
        pts = [axis_point(3, k) for k in (0, 4, 9)]
        both = SeparatedDensity(u1.scaled(2.5).terms + u2.scaled(-0.75).terms, grid)
        want = 2.5 * evaluate(kernel, u1, pts) - 0.75 * evaluate(kernel, u2, pts)
        np.testing.assert_allclose(evaluate(kernel, both, pts), want, rtol=1e-13)
        np.testing.assert_allclose(evaluate(kernel, u1.scaled(3.0), pts), 3 * evaluate(kernel, u1, pts), rtol=1e-15)

    @settings(max_examples=15, deadline=None)
    @given(st.permutations([0, 1, 2]), st.lists(st.integers(-6, 6), min_size=3, max_size=3))
    def test_permutation_bit_identical(self, small, perm, ks):
        grid, kernel = small
        x = grid.coords
        factors = [np.exp(-x * x), (1 + x) * np.exp(-x * x), np.exp(-2 * (x - 0.3) ** 2)]
        base = SeparatedDensity((DensityTerm(1.3, tuple((f, 1) for f in factors)),), grid)
        permuted = SeparatedDensity((DensityTerm(1.3, tuple((factors[j], 1) for j in perm)),), grid)
        a = evaluate(kernel, base, [tuple((k, 1) for k in ks)])[0]
        b = evaluate(kernel, permuted, [tuple((ks[j], 1) for j in perm)])[0]
        assert a == b

    def test_blocks_equal_expanded_point(self, small):
        grid, kernel = small
        d = sample_density("u2", grid, 3)
        a = evaluate(kernel, d, [((2, 1), (0, 2))])[0]
        b = evaluate(kernel, d, [((2, 1), (0, 1), (0, 1))])[0]
        c = evaluate(kernel, d, [((0, 1), (2, 1), (0, 1))])[0]
        assert a == pytest.approx(b, rel=1e-14)
        assert a == pytest.approx(c, rel=1e-14)

    def test_symmetric_term_matches_explicit_sum(self, small):
        grid, kernel = small
        x = grid.coords
        special, gauss = (4 * x * x - 2) * np.exp(-x * x), np.exp(-x * x)
        explicit = SeparatedDensity(
            tuple(DensityTerm(1.0, tuple((special if i == j else gauss, 1) for i in range(3))) for j in range(3)),
            grid,
        )
        pts = [((3, 1), (-1, 1), (4, 1)), axis_point(3, 5)]
        np.testing.assert_allclose(
            evaluate(kernel, sample_density("u2", grid, 3), pts), evaluate(kernel, explicit, pts), rtol=1e-13
        )

    def test_thread_determinism(self, small):
        grid, kernel = small
        d = sample_density("u2", grid, 3)
        pts = [axis_point(3, k) for k in range(-10, 11)]
        a = evaluate(kernel, d, pts, threads=1)
        b = evaluate(kernel, d, pts, threads=4)
        assert a.tobytes() == b.tobytes()

    def test_underflow_flag(self):
        # exp(-|x|^2) with |x|^2 = 4e4: every term underflows, the log-space sum does not
        grid, kernel = newton_setup(10_000, M=1, h=0.1, A=3.0)
        d = sample_density("u2", grid, 10_000)
        res = evaluate(kernel, d, [((20, 10_000),), axis_point(10_000, 10)], return_flags=True)
        assert res.values[0] == 0.0 and res.underflow[0]
        assert res.values[1] < 0 and not res.underflow[1]

    def test_rejects_mismatch(self, small):
        grid, kernel = small
        d = sample_density("u1", grid, 3)
        with pytest.raises(ValueError):
            evaluate(kernel, d, [axis_point(3, 0)], grid=GridSpec.cube(0.2, 2.0))
        other = GridSpec.cube(0.1, 4.0)
        with pytest.raises(ValueError):
            evaluate(kernel, sample_density("u1", other, 3), [axis_point(3, 0)])
        with pytest.raises(ValueError):
            evaluate(kernel, d, [axis_point(3, 100)])
        with pytest.raises(ValueError):
            evaluate(kernel, d, [axis_point(2, 0)])


class TestAdvectionDiffusionCubature:
    @staticmethod
    def error(M, h, b=(0.3, -0.2, 0.5), c=1.0, x1=0.5, D=3.0, A=6.0):
        grid = GridSpec.cube(h, A)
        sub, rule = PRESETS["fine-a6b5"].sub, PRESETS["fine-a6b5"].rule
        nodes = advdiff_nodes(sub, rule, D * h * h * c)
        kernel = build_kernel("advdiff", CubatureParams(3, h, D, M), nodes, grid.m_max - grid.m_min,
                              advdiff=AdvectionDiffusionParams(b, c))
        k = int(round(x1 / h))
        v = evaluate(kernel, sample_density("u1", grid, 3), [axis_point(3, k)])[0]
        return abs(v - advdiff_exact_n3(b, c, np.array([k * h, 0, 0])))

    @pytest.mark.parametrize("M,order", [(1, 2), (2, 4)])
    def test_rates(self, M, order):
        e = [self.error(M, h) for h in (0.2, 0.1, 0.05)]
        rate = math.log2(e[1] / e[2])
        assert rate == pytest.approx(order, abs=0.4)

    def test_drift_tables(self):
        grid = GridSpec.cube(0.5, 2.0)
        nodes = advdiff_nodes(PRESETS["fine-a6b5"].sub, PRESETS["fine-a6b5"].rule, 0.0)
        k = build_kernel("advdiff", CubatureParams(3, 0.5, 2.0, 1), nodes, 8,
                         advdiff=AdvectionDiffusionParams((0.5, 0.0, 0.5), 1.0))
        assert sorted(k.tables) == [0.0, 0.5]
        t = k.tables[0.5]
        assert not np.allclose(t, t[:, ::-1])
        sym = sample_density("u2", grid, 3)
        with pytest.raises(ValueError):
            evaluate(k, sym, [axis_point(3, 0)])


class TestExport:
    def test_binary_roundtrip(self, tmp_path, small):
        _, kernel = small
        path = tmp_path / "k.bin"
        write_kernel(kernel, path)
        header, w, tables = read_kernel(path)
        assert header == dict(kind="newton", M=2, n=3, h=0.2, D=3.0, R=kernel.rank, m_max=kernel.m_max)
        assert w.tobytes() == kernel.weights.tobytes()
        assert tables[0].tobytes() == kernel.tables[0.0].tobytes()

    def test_truncated_file(self, tmp_path, small):
        _, kernel = small
        path = tmp_path / "k.bin"
        write_kernel(kernel, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            read_kernel(path)

    def test_csv(self, small):
        _, kernel = small
        text = kernel_csv(kernel)
        lines = text.strip().splitlines()
        assert len(lines) == kernel.rank + 1
        first = np.array(lines[1].split(","), dtype=float)
        assert first[1] == pytest.approx(kernel.weights[0], rel=1e-12)
        np.testing.assert_allclose(first[2:], kernel.tables[0.0][0], rtol=1e-12)
