import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import dawsn

from volpot.specfun import (
    MAX_ORDER,
    DomainError,
    erf,
    erfc,
    eta_radial,
    eta_tilde_1d,
    faddeeva,
    laguerre,
    lower_gamma_over_power,
    lower_incomplete_gamma,
)

mpmath.mp.dps = 40


def laguerre_expansion(k, alpha, y):
    # L_k^a(y) = sum_i (-1)^i binom(k+a, k-i) y^i / i!, with its term magnitudes
    terms = []
    for i in range(k + 1):
        binom = math.gamma(k + alpha + 1) / (math.gamma(k - i + 1) * math.gamma(alpha + i + 1))
        terms.append((-1) ** i * binom * y**i / math.factorial(i))
    return math.fsum(terms), math.fsum(abs(t) for t in terms)


class TestLaguerre:
    def test_degree_zero(self):
        assert laguerre(0, -0.5, 7.3) == 1.0

    def test_degree_one_root(self):
        assert laguerre(1, -0.5, 0.5) == 0.0

    def test_rodrigues_formula_symbolic(self):
        y = sp.symbols("y", positive=True)
        k, a = 3, sp.Rational(1, 2)
        rod = y ** (-a) * sp.exp(y) / sp.factorial(k) * sp.diff(sp.exp(-y) * y ** (k + a), y, k)
        expected = float(sp.simplify(rod).subs(y, 1))
        assert laguerre(3, 0.5, 1.0) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("k", range(7))
    @pytest.mark.parametrize("alpha", [-0.5, 0.5, 1.5, 2.5, 50.0])
    def test_matches_explicit_expansion(self, k, alpha):
        for y in np.linspace(0.0, 12.0, 25):
            value, scale = laguerre_expansion(k, alpha, y)
            assert abs(laguerre(k, alpha, y) - value) <= 1e-13 * scale

    def test_vectorized(self):
        y = np.array([0.0, 0.5, 2.0])
        out = laguerre(4, 0.5, y)
        assert out.shape == (3,)
        assert out[1] == pytest.approx(laguerre(4, 0.5, 0.5), rel=0, abs=0)

    def test_sympy_assoc_laguerre(self):
        for k in range(6):
            for y in (0.3, 1.7, 6.0):
                ref = float(sp.assoc_laguerre(k, sp.Rational(-1, 2), sp.Float(y, 30)))
                assert laguerre(k, -0.5, y) == pytest.approx(ref, rel=1e-13, abs=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            laguerre(2, -1.0, 1.0)
        with pytest.raises(DomainError):
            laguerre(-1, 0.0, 1.0)


class TestIncompleteGamma:
    def test_zero(self):
        assert lower_incomplete_gamma(1.0, 0.0) == 0.0

    def test_infinite_limit(self):
        assert lower_incomplete_gamma(0.5, math.inf) == pytest.approx(math.sqrt(math.pi), rel=1e-15)

    def test_half_at_one_by_quadrature(self):
        # gamma(1/2, 1) = int_0^1 s^(-1/2) e^(-s) ds = 2 int_0^1 e^(-v^2) dv
        ref = float(mpmath.quad(lambda s: s ** (-0.5) * mpmath.exp(-s), [0, 1]))
        assert lower_incomplete_gamma(0.5, 1.0) == pytest.approx(ref, rel=1e-14)
        assert ref == pytest.approx(math.sqrt(math.pi) * math.erf(1.0), rel=1e-14)

    @pytest.mark.parametrize("a", [0.1, 0.5, 1.0, 2.5, 7.0, 20.0, 99.5])
    @pytest.mark.parametrize("x", [1e-6, 0.3, 1.0, 4.0, 15.0, 60.0, 150.0])
    def test_against_mpmath(self, a, x):
        ref = float(mpmath.gammainc(a, 0, x))
        assert lower_incomplete_gamma(a, x) == pytest.approx(ref, rel=1e-14)

    @pytest.mark.parametrize("a, x", [(1e3, 990.0), (1e3, 1010.0), (1e4, 1e4), (1e5, 1.00001), (1e6, 1.0), (1e6, 1.0005)])
    def test_large_order_against_mpmath(self, a, x):
        ref = mpmath.gammainc(a, 0, x)
        if ref > mpmath.mpf(1e300):
            assert lower_incomplete_gamma(a, x) == math.inf
            return
        assert lower_incomplete_gamma(a, x) == pytest.approx(float(ref), rel=1e-14)

    @pytest.mark.parametrize("a", [0.5, 1.0, 5.0, 20.0])
    def test_upper_limit_approaches_gamma(self, a):
        assert lower_incomplete_gamma(a, 200.0) == pytest.approx(math.gamma(a), rel=1e-13)

    @given(st.floats(0.05, 30.0), st.floats(0.0, 80.0), st.floats(0.0, 10.0))
    def test_monotone_in_x(self, a, x, dx):
        assert lower_incomplete_gamma(a, x + dx) >= lower_incomplete_gamma(a, x)

    @pytest.mark.parametrize("a", [0.5, 3.0, 49.0, 5e4])
    @pytest.mark.parametrize("x", [0.0, 0.2, 3.0, 40.0, 5e4])
    def test_scaled_form(self, a, x):
        ref = mpmath.gammainc(a, 0, x) / mpmath.mpf(x) ** a if x else 1 / mpmath.mpf(a)
        assert lower_gamma_over_power(a, x) == pytest.approx(float(ref), rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            lower_incomplete_gamma(0.0, 1.0)
        with pytest.raises(DomainError):
            lower_incomplete_gamma(1.0, -1.0)


class TestErf:
    def test_zero(self):
        assert erf(0.0) == 0.0
        assert erfc(0.0) == 1.0

    def test_golden_value(self):
        # brute-force Maclaurin series in high precision
        x = mpmath.mpf(1)
        series = 2 / mpmath.sqrt(mpmath.pi) * mpmath.nsum(
            lambda k: (-1) ** k * x ** (2 * k + 1) / (mpmath.factorial(k) * (2 * k + 1)), [0, mpmath.inf]
        )
        assert abs(erf(1.0) - float(series)) <= 1e-15
        assert abs(erf(1.0) - 0.8427007929497149) <= 1e-15

    @given(st.floats(-30.0, 30.0))
    def test_complement(self, x):
        assert erf(x) + erfc(x) == pytest.approx(1.0, abs=2e-16)

    def test_against_mpmath_grid(self):
        for x in np.linspace(-6, 6, 61):
            assert abs(erf(x) - float(mpmath.erf(x))) <= 1e-15
            assert erfc(x) == pytest.approx(float(mpmath.erfc(x)), rel=1e-14)

    def test_arrays(self):
        x = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_allclose(erf(x), [math.erf(v) for v in x], rtol=0, atol=1e-15)


class TestFaddeeva:
    def test_origin(self):
        assert faddeeva(0j) == 1 + 0j

    def test_imaginary_axis(self):
        value = faddeeva(1j)
        assert value.imag == 0.0
        assert value.real == pytest.approx(math.e * math.erfc(1.0), rel=1e-15)
        assert value.real == pytest.approx(0.4275835761558070, rel=1e-15)

    def test_schwarz_symmetry(self):
        z = 0.3 + 0.7j
        assert faddeeva(-z.conjugate()) == pytest.approx(faddeeva(z).conjugate(), rel=1e-15)

    def test_upper_half_plane_against_mpmath(self):
        rng = np.random.default_rng(7)
        radii = np.concatenate([[0.0], np.logspace(-3, math.log10(50), 60)])
        for r in radii:
            theta = rng.uniform(0, math.pi)
            z = complex(r * math.cos(theta), r * math.sin(theta))
            ref = complex(mpmath.exp(-mpmath.mpc(z) ** 2) * mpmath.erfc(-1j * mpmath.mpc(z)))
            assert abs(faddeeva(z) - ref) <= 1e-12 * abs(ref)

    def test_lower_half_plane_reflection(self):
        for z in (0.4 - 0.3j, -2.0 - 1.5j, 3.0 - 0.1j):
            ref = complex(mpmath.exp(-mpmath.mpc(z) ** 2) * mpmath.erfc(-1j * mpmath.mpc(z)))
            assert abs(faddeeva(z) - ref) <= 1e-12 * abs(ref)

    def test_real_axis_dawson(self):
        # Im w(x) = 2 D(x) / sqrt(pi), Re w(x) = exp(-x^2)
        x = np.linspace(-8, 8, 100)
        w = faddeeva(x.astype(complex))
        np.testing.assert_allclose(w.imag, 2 / math.sqrt(math.pi) * dawsn(x), rtol=1e-12, atol=1e-300)
        np.testing.assert_allclose(w.real, np.exp(-x * x), rtol=1e-12)


class TestGenerators:
    def test_eta_radial_origin(self):
        assert eta_radial(1, 3, np.zeros(3)) == pytest.approx(math.pi ** -1.5, rel=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 5, 11])
    def test_eta_radial_unit_sphere(self, n):
        x = np.zeros(n)
        x[0] = 1.0
        assert eta_radial(1, n, x) == pytest.approx(math.pi ** (-n / 2) * math.exp(-1), rel=1e-15)

    def test_eta_radial_laplacian_sum(self):
        # eta_2M = pi^(-n/2) sum_k (-1)^k / (k! 4^k) Laplace^k exp(-|x|^2), radial Laplacian in R^3
        r = sp.symbols("r", positive=True)
        f = sp.exp(-r**2)
        total, term = 0, f
        M, n = 4, 3
        for k in range(M):
            total += sp.Integer(-1) ** k / (sp.factorial(k) * 4**k) * term
            term = sp.diff(term, r, 2) + (n - 1) / r * sp.diff(term, r)
        expected = float((sp.pi ** sp.Rational(-3, 2) * total).subs(r, sp.Rational(1, 2)))
        assert eta_radial(M, n, np.array([0.5, 0.0, 0.0])) == pytest.approx(expected, rel=1e-13)

    def test_eta_tilde_values(self):
        assert eta_tilde_1d(1, 0.0) == 1.0
        assert eta_tilde_1d(2, 0.0) == 1.5

    @pytest.mark.parametrize("M", range(1, MAX_ORDER + 1))
    def test_eta_tilde_two_expressions(self, M):
        for x in (0.0, 0.4, 1.2, 2.7):
            alt = sum(laguerre(k, -0.5, x * x) for k in range(M)) * math.exp(-x * x)
            assert eta_tilde_1d(M, x) == pytest.approx(alt, rel=1e-14, abs=1e-15)

    @pytest.mark.parametrize("M", range(1, 6))
    def test_moment_conditions(self, M):
        # trapezoid on a rapidly decaying smooth integrand is spectrally accurate
        x = np.linspace(-14, 14, 28001)
        dx = x[1] - x[0]
        eta = eta_tilde_1d(M, x) / math.sqrt(math.pi)
        assert abs(np.sum(eta) * dx - 1.0) <= 1e-12
        for j in range(1, 2 * M):
            assert abs(np.sum(x**j * eta) * dx) <= 1e-12
        # moment 2M does not vanish
        assert abs(np.sum(x ** (2 * M) * eta) * dx) > 1e-3

    def test_order_limit(self):
        with pytest.raises(DomainError):
            eta_tilde_1d(MAX_ORDER + 1, 0.0)
        with pytest.raises(DomainError):
            eta_radial(0, 3, np.zeros(3))


@settings(max_examples=50)
@given(st.integers(0, 6), st.floats(0.0, 20.0))
def test_laguerre_recurrence_property(k, y):
    # derivative identity d/dy L_k^a = -L_{k-1}^{a+1}, checked by central differences
    if k == 0:
        return
    d = 1e-5
    deriv = (laguerre(k, 0.5, y + d) - laguerre(k, 0.5, y - d)) / (2 * d) if y > d else None
    if deriv is None:
        return
    scale = max(1.0, abs(laguerre(k - 1, 1.5, y)))
    assert deriv == pytest.approx(-laguerre(k - 1, 1.5, y), abs=1e-6 * scale * (1 + y) ** k)
