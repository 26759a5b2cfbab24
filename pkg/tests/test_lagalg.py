"""Tests for the Laguerre-expansion algebra.

Oracle routes:
  * exact Gauss-Laguerre quadrature (polynomial x exponential integrands are
    integrated exactly by a sufficiently large rule), and
  * adaptive multiprecision quadrature for spot checks.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.polynomial.laguerre import laggauss
from scipy.special import eval_genlaguerre

from prolate import lagalg, oracle
from prolate.lagalg import (
    ExpansionCoeffs,
    TruncationError,
    hylleraas_basis,
    hylleraas_overlap_matrix,
    laguerre_c_coeffs,
    mult_by_x,
    multiply,
    product_tensor,
    rescale,
    strip_weights,
    x_lag_matrix,
)


def gl_nodes(n=90):
    return laggauss(n)


def c_quadrature(mu_triple, i_triple, z, n=90):
    """int L^{mu1}_{i1} L^{mu2}_{i2} L^{mu3}_{i3} e^{-z x} dx, exact GL rule."""
    t, w = gl_nodes(n)
    x = t / z
    vals = np.ones_like(x) / z
    for mu, i in zip(mu_triple, i_triple):
        vals = vals * eval_genlaguerre(i, mu, x)
    return float(np.sum(w * vals))


def h_value(mu, k, x):
    x = np.asarray(x, dtype=float)
    norm = math.sqrt(
        Fraction(math.factorial(k), math.factorial(k + mu)))
    return norm * x ** (mu / 2.0) * np.exp(-x / 2.0) * eval_genlaguerre(k, mu, x)


class TestLaguerreCCoeffs:
    def test_c000_is_inverse_z(self):
        for z in (1, Fraction(3, 2), 0.8, 2.5):
            c = laguerre_c_coeffs((0, 0, 0), z, 0)
            val = c[0, 0, 0]
            assert float(val) == pytest.approx(1.0 / float(z), rel=1e-15)

    def test_exact_integer_at_z1(self):
        c = laguerre_c_coeffs((0, 0, 0), 1, 8)
        for idx in np.ndindex(c.shape):
            assert Fraction(c[idx]).denominator == 1
        assert c[1, 0, 0] == 0
        assert c[1, 1, 0] == 1
        assert c[1, 1, 1] == -2

    def test_hand_values_against_quadrature_mu0(self):
        c = laguerre_c_coeffs((0, 0, 0), 1, 6)
        for idx in [(1, 1, 1), (2, 1, 0), (3, 2, 1), (6, 5, 4), (2, 2, 2)]:
            assert float(c[idx]) == pytest.approx(
                c_quadrature((0, 0, 0), idx, 1.0), rel=1e-9, abs=1e-9)

    def test_generic_mu_against_quadrature(self):
        mu = (1, 1, 0)
        z = Fraction(3, 2)
        c = laguerre_c_coeffs(mu, z, 5)
        for idx in [(0, 0, 0), (1, 0, 0), (2, 3, 1), (5, 5, 5), (4, 2, 3)]:
            assert float(c[idx]) == pytest.approx(
                c_quadrature(mu, idx, 1.5), rel=2e-12, abs=1e-13)

    def test_generic_mu_against_mpmath_oracle(self):
        import mpmath
        mu = (2, 1, 1)
        z = 1.3
        c = laguerre_c_coeffs(mu, z, 3)

        def integrand(x):
            return (mpmath.laguerre(3, mu[0], x) * mpmath.laguerre(2, mu[1], x)
                    * mpmath.laguerre(1, mu[2], x) * mpmath.exp(-z * x))

        ref = oracle.quad(integrand, 0, mpmath.inf, rtol=1e-13)
        assert float(c[3, 2, 1]) == pytest.approx(float(ref), rel=1e-11)

    def test_float_path_matches_exact_path(self):
        ce = laguerre_c_coeffs((0, 1, 1), Fraction(3, 2), 10).astype(float)
        cf = laguerre_c_coeffs((0, 1, 1), 1.5, 10)
        assert np.allclose(ce, cf, rtol=5e-13, atol=1e-13)

    def test_symmetry_mu0(self):
        c = laguerre_c_coeffs((0, 0, 0), Fraction(3, 2), 5)
        for i1, i2, i3 in np.ndindex(c.shape):
            assert c[i1, i2, i3] == c[i2, i1, i3] == c[i3, i2, i1]

    def test_central_coefficient_bounded_iff_z_above_threshold(self):
        # growing for z = 1.4, bounded (and sign-alternating) for z = 1.5
        c_grow = laguerre_c_coeffs((0, 0, 0), 1.4, 60)
        c_stay = laguerre_c_coeffs((0, 0, 0), 1.5, 60)
        diag_grow = np.array([abs(c_grow[i, i, i]) for i in range(61)])
        diag_stay = np.array([abs(c_stay[i, i, i]) for i in range(61)])
        assert diag_grow[50:].max() > 10 * diag_grow[:10].max()
        assert diag_stay[50:].max() <= diag_stay[:10].max()
        signs = [np.sign(float(c_stay[i, i, i])) for i in range(40, 61)]
        assert all(s == (1 if i % 2 == 0 else -1)
                   for i, s in zip(range(40, 61), signs))

    def test_companion_eigenvalues(self):
        # characteristic polynomial of the single-index homogeneous recurrence
        # equals (t-1)^2 (t + (3/z - 1)) exactly
        for z in (1, Fraction(5, 4), Fraction(3, 2), 2):
            z = Fraction(z)
            a1 = -3 * (1 / z - 1)   # coefficient of u_{k-1}
            a2 = 3 * (2 / z - 1)    # coefficient of u_{k-2}
            a3 = -(3 / z - 1)       # coefficient of u_{k-3}
            rho = 3 / z - 1
            # t^3 - a1 t^2 - a2 t - a3 == (t-1)^2 (t+rho)
            assert -a1 == rho - 2
            assert -a2 == 1 - 2 * rho
            assert -a3 == rho
        Z = np.array([[0.0, 1.0, 0.0],
                      [0.0, 0.0, 1.0],
                      [-(3 / 1.5 - 1), 3 * (2 / 1.5 - 1), -3 * (1 / 1.5 - 1)]])
        eigs = np.sort_complex(np.linalg.eigvals(Z))
        expect = np.sort_complex(np.array([1.0, 1.0, -(3 / 1.5 - 1)]))
        assert np.allclose(eigs, expect, atol=1e-6)

    def test_imax_triple(self):
        c = laguerre_c_coeffs((0, 0, 0), 1.5, (2, 3, 4))
        assert c.shape == (3, 4, 5)

    def test_invalid_z(self):
        with pytest.raises(ValueError):
            laguerre_c_coeffs((0, 0, 0), 0, 2)
        with pytest.raises(ValueError):
            laguerre_c_coeffs((0, 0, 0), -1.0, 2)


class TestStripWeights:
    def test_mu0_identity(self):
        w = strip_weights(0, 3)
        assert list(w) == [0, 0, 0, 1]

    def test_mu1_hand(self):
        # x L^1_i = (i+1) L^0_i - (i+1) L^0_{i+1}
        w = strip_weights(1, 2)
        assert list(w) == [0, 0, 3, -3]

    def test_pointwise(self):
        x = np.linspace(0.1, 9.0, 8)
        for mu, i in [(1, 0), (1, 4), (2, 3), (3, 2)]:
            w = strip_weights(mu, i).astype(float)
            lhs = x ** mu * eval_genlaguerre(i, mu, x)
            rhs = sum(w[j] * eval_genlaguerre(j, 0, x) for j in range(len(w)))
            assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


class TestHylleraasBasis:
    def test_orthonormal_gauss_laguerre(self):
        # H^mu_k H^mu_k' e^{+x} is a polynomial: the GL rule integrates exactly
        t, w = gl_nodes(80)
        for mu in range(4):
            B = hylleraas_basis(mu, 11, t)
            G = (B * w[:, None] * np.exp(t)[:, None]).T @ B
            assert np.allclose(G, np.eye(11), atol=2e-12)

    def test_orthonormal_mpmath_oracle(self):
        import mpmath

        def integrand(x):
            l7 = mpmath.laguerre(7, 2, x)
            return x ** 2 * mpmath.exp(-x) * l7 * l7 * (
                mpmath.mpf(math.factorial(7)) / math.factorial(9))

        val = oracle.quad(integrand, 0, mpmath.inf, rtol=1e-13)
        assert float(val) == pytest.approx(1.0, rel=1e-12)

    def test_matches_scipy_eval(self):
        x = np.array([0.3, 1.7, 6.1])
        B = hylleraas_basis(2, 6, x)
        for k in range(6):
            assert np.allclose(B[:, k], h_value(2, k, x), rtol=1e-13)


class TestProductTensor:
    def test_a000(self):
        T = product_tensor(0, 0, -1, 4)
        assert T.tensor[0, 0, 0] == pytest.approx(2.0 / 3.0, rel=1e-14)

    def test_slab_symmetry_equal_mu(self):
        for mu, sign in [(0, -1), (1, -1), (1, 1), (2, -1)]:
            T = product_tensor(mu, mu, sign, 6)
            assert np.allclose(T.tensor, np.transpose(T.tensor, (1, 0, 2)),
                               rtol=1e-12, atol=1e-14)

    def test_against_quadrature_110(self):
        T = product_tensor(1, 1, -1, 6)
        t, w = gl_nodes(80)
        x = t / 1.5
        for i, j, k in [(0, 0, 0), (2, 1, 3), (4, 4, 4), (6, 0, 6), (1, 5, 2)]:
            vals = (x * eval_genlaguerre(i, 1, x) * eval_genlaguerre(j, 1, x)
                    * eval_genlaguerre(k, 0, x) / 1.5)
            ref = np.sum(w * vals) / math.sqrt((i + 1) * (j + 1))
            assert T.tensor[i, j, k] == pytest.approx(ref, rel=1e-11, abs=1e-13)

    def test_against_quadrature_sum_case(self):
        # mu3 = mu1 + mu2 = 2
        T = product_tensor(1, 1, +1, 5)
        t, w = gl_nodes(80)
        x = t / 1.5
        for i, j, k in [(0, 0, 0), (1, 2, 1), (3, 3, 5), (2, 0, 4)]:
            vals = (x ** 2 * eval_genlaguerre(i, 1, x) * eval_genlaguerre(j, 1, x)
                    * eval_genlaguerre(k, 2, x) / 1.5)
            norm = math.sqrt(math.factorial(k) / math.factorial(k + 2)
                             / ((i + 1) * (j + 1)))
            ref = np.sum(w * vals) * norm
            assert T.tensor[i, j, k] == pytest.approx(ref, rel=1e-11, abs=1e-13)

    def test_mixed_mu_against_quadrature(self):
        # mu1=2, mu2=1, mu3=1
        T = product_tensor(2, 1, -1, 5)
        t, w = gl_nodes(80)
        x = t / 1.5
        for i, j, k in [(0, 0, 0), (2, 1, 3), (4, 3, 2)]:
            vals = (x ** 2 * eval_genlaguerre(i, 2, x) * eval_genlaguerre(j, 1, x)
                    * eval_genlaguerre(k, 1, x) / 1.5)
            norm = math.sqrt(math.factorial(i) / math.factorial(i + 2)
                             / (j + 1) / (k + 1))
            ref = np.sum(w * vals) * norm
            assert T.tensor[i, j, k] == pytest.approx(ref, rel=1e-11, abs=1e-13)

    def test_requires_mu1_ge_mu2(self):
        with pytest.raises(ValueError):
            product_tensor(1, 2, -1, 4)


class TestMultiply:
    def _random_expansion(self, mu, scale, K, rng, decay=0.45):
        d = rng.standard_normal(K) * decay ** np.arange(K)
        return ExpansionCoeffs(mu, scale, d)

    def test_same_scale_pointwise(self):
        rng = np.random.default_rng(7)
        e1 = self._random_expansion(0, 2.0, 8, rng)
        e2 = self._random_expansion(0, 2.0, 6, rng)
        prod = multiply(e1, e2, 0, 0)
        x = np.linspace(0.05, 6.0, 25)
        ref = e1(x) * e2(x)
        assert np.allclose(prod(x), ref, rtol=1e-10, atol=1e-12)
        assert prod.mu == 0 and prod.scale == 2.0

    def test_different_scales_pointwise(self):
        rng = np.random.default_rng(11)
        e1 = self._random_expansion(0, 2.0, 9, rng)
        e2 = self._random_expansion(0, 3.0, 7, rng)
        prod = multiply(e1, e2, 0, 0)
        assert prod.scale == pytest.approx(2.5)
        x = np.linspace(0.05, 5.0, 21)
        assert np.allclose(prod(x), e1(x) * e2(x), rtol=1e-9, atol=1e-12)

    def test_mu_difference_and_sum(self):
        rng = np.random.default_rng(3)
        e1 = self._random_expansion(1, 2.2, 8, rng)
        e2 = self._random_expansion(1, 1.8, 8, rng)
        x = np.linspace(0.1, 5.0, 17)
        # m1 = +1, m2 = +1 -> mu3 = 0
        prod0 = multiply(e1, e2, 1, 1)
        assert prod0.mu == 0
        assert np.allclose(prod0(x), e1(x) * e2(x), rtol=1e-9, atol=1e-12)
        # m1 = +1, m2 = -1 -> mu3 = 2
        prod2 = multiply(e1, e2, 1, -1)
        assert prod2.mu == 2
        assert np.allclose(prod2(x), e1(x) * e2(x), rtol=1e-9, atol=1e-12)

    def test_mixed_order_swaps(self):
        rng = np.random.default_rng(5)
        e1 = self._random_expansion(0, 2.0, 6, rng)
        e2 = self._random_expansion(2, 2.0, 6, rng)
        prod = multiply(e1, e2, 0, 2)
        assert prod.mu == 2
        x = np.linspace(0.1, 4.0, 13)
        assert np.allclose(prod(x), e1(x) * e2(x), rtol=1e-9, atol=1e-12)

    def test_output_length_roughly_additive(self):
        # for inputs truncated at machine tail, the product's significant
        # length is close to the sum of the input lengths
        rng = np.random.default_rng(19)
        e1 = self._random_expansion(0, 2.0, 16, rng, decay=0.1)
        e2 = self._random_expansion(0, 2.0, 16, rng, decay=0.1)
        prod = multiply(e1, e2, 0, 0)
        assert len(prod) <= len(e1) + len(e2) + 10
        assert prod.tail_ratio() < 1e-10

    def test_truncation_error_raised(self):
        rng = np.random.default_rng(23)
        d = rng.standard_normal(24) * 0.8 ** np.arange(24)
        e = ExpansionCoeffs(0, 2.0, d)
        with pytest.raises(TruncationError):
            multiply(e, e, 0, 0, K_out=10)

    def test_mu_mismatch_rejected(self):
        e = ExpansionCoeffs(1, 2.0, [1.0])
        with pytest.raises(ValueError):
            multiply(e, e, 0, 0)


class TestRescale:
    def test_identity(self):
        e = ExpansionCoeffs(1, 2.0, [0.4, -0.2, 0.05])
        out = rescale(e, 2.0)
        assert out.scale == 2.0
        assert np.array_equal(out.coeffs, e.coeffs)

    def test_overlap_matrix_against_quadrature(self):
        # integrand is x^mu * poly * e^{-(1+y)x/2}: exact under a GL rule
        # after substituting t = (1+y)x/2
        t, w = gl_nodes(110)
        for mu in (0, 1):
            for y in (0.7, 1.6):
                M = hylleraas_overlap_matrix(mu, y, 6, 6)
                s = (1.0 + y) / 2.0
                x = t / s
                for i in (0, 2, 5):
                    for k in (0, 3, 5):
                        norm = math.sqrt(
                            Fraction(math.factorial(i) * math.factorial(k),
                                     math.factorial(i + mu)
                                     * math.factorial(k + mu)))
                        poly = (x ** mu * y ** (mu / 2.0)
                                * eval_genlaguerre(i, mu, x)
                                * eval_genlaguerre(k, mu, y * x) * norm)
                        ref = np.sum(w * poly) / s
                        # the float64 rule itself carries ~1e-13 roundoff
                        assert M[i, k] == pytest.approx(ref, rel=2e-10,
                                                        abs=5e-13)

    def test_overlap_matrix_against_mpmath_oracle(self):
        import mpmath
        mu, y, i, k = 0, 0.7, 0, 3
        M = hylleraas_overlap_matrix(mu, y, 6, 6)

        def f(x):
            return (mpmath.laguerre(i, mu, x) * mpmath.laguerre(k, mu, y * x)
                    * mpmath.exp(-(1 + y) / 2 * x))

        ref = oracle.quad(f, 0, mpmath.inf, rtol=1e-15, dps=35)
        assert M[i, k] == pytest.approx(float(ref), rel=1e-13)

    def test_pointwise(self):
        rng = np.random.default_rng(2)
        d = rng.standard_normal(10) * 0.4 ** np.arange(10)
        e = ExpansionCoeffs(1, 2.0, d)
        out = rescale(e, 3.1)
        x = np.linspace(0.05, 4.0, 19)
        assert np.allclose(out(x), e(x), rtol=1e-10, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(13)
        d = rng.standard_normal(12) * 0.35 ** np.arange(12)
        e = ExpansionCoeffs(0, 2.0, d)
        back = rescale(rescale(e, 3.0), 2.0)
        assert np.allclose(back.coeffs[: len(d)], d, atol=1e-11)

    def test_tail_flagged(self):
        rng = np.random.default_rng(29)
        d = rng.standard_normal(8) * 0.1 ** np.arange(8)
        e = ExpansionCoeffs(0, 2.0, d)
        with pytest.raises(TruncationError):
            rescale(e, 8.0, K_out=10)

    def test_invalid_scale(self):
        e = ExpansionCoeffs(0, 2.0, [1.0])
        with pytest.raises(ValueError):
            rescale(e, -1.0)


class TestMultByX:
    def test_unit_vector(self):
        e = ExpansionCoeffs(0, 1.0, [1.0])
        out = mult_by_x(e)
        assert np.allclose(out.coeffs, [1.0, -1.0])
        assert len(out) == len(e) + 1

    def test_pointwise(self):
        rng = np.random.default_rng(31)
        for mu in (0, 1, 2):
            d = rng.standard_normal(9) * 0.4 ** np.arange(9)
            e = ExpansionCoeffs(mu, 2.5, d)
            out = mult_by_x(e)
            x = np.linspace(0.05, 5.0, 15)
            assert np.allclose(out(x), (2.5 * x) * e(x), rtol=1e-11, atol=1e-13)

    def test_matrix_consistency(self):
        X1 = x_lag_matrix(1, 5)
        X2 = x_lag_matrix(1, 6)
        e = ExpansionCoeffs(1, 1.0, [0.3, -0.1, 0.7, 0.02, -0.4])
        twice = mult_by_x(mult_by_x(e))
        assert np.allclose(twice.coeffs, (X2 @ X1) @ e.coeffs, rtol=1e-13)


class TestExpansionCoeffs:
    def test_tail_guard(self):
        good = ExpansionCoeffs(0, 1.0, [1.0, 1e-3, 1e-15])
        good.require_tail()
        bad = ExpansionCoeffs(0, 1.0, [1.0, 0.5, 0.2])
        with pytest.raises(TruncationError):
            bad.require_tail()

    def test_trimmed(self):
        e = ExpansionCoeffs(0, 1.0, [1.0, 1e-2, 1e-17, 1e-18])
        assert len(e.trimmed()) == 2

    def test_padded(self):
        e = ExpansionCoeffs(0, 1.0, [1.0, 0.5])
        assert len(e.padded(5)) == 5
        assert np.allclose(e.padded(5).coeffs[:2], [1.0, 0.5])

    def test_validation(self):
        with pytest.raises(ValueError):
            ExpansionCoeffs(-1, 1.0, [1.0])
        with pytest.raises(ValueError):
            ExpansionCoeffs(0, 0.0, [1.0])
