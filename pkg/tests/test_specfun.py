"""Tests for the shared special-function layer."""

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy.physics.wigner as spw

from prolate import oracle
from prolate import specfun as sf


class TestAssocLegendreP:
    def test_p00_is_one(self):
        assert sf.assoc_legendre_p(0, 0, 0.3) == 1.0

    def test_p1_is_x(self):
        for x in (-0.9, 0.0, 0.64, 1.8):
            assert sf.assoc_legendre_p(1, 0, x) == pytest.approx(x, abs=1e-15)

    def test_p12_radial_branch_closed_form(self):
        # independent closed form: P^1_2(x) = 3 x sqrt(x^2 - 1) for x > 1
        x = 1.5
        assert sf.assoc_legendre_p(2, 1, x) == pytest.approx(
            3 * x * math.sqrt(x * x - 1), rel=1e-15)

    def test_angular_branch_square_root_factor(self):
        # P^2_2(x) = 3 (1 - x^2) on the angular branch (no phase)
        x = 0.37
        assert sf.assoc_legendre_p(2, 2, x) == pytest.approx(3 * (1 - x * x), rel=1e-15)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            sf.assoc_legendre_p(2, 3, 0.5)
        with pytest.raises(ValueError):
            sf.assoc_legendre_p(2, -1, 0.5)

    def test_three_term_recurrence_both_branches(self):
        # x P^mu_k = (k+mu)/(2k+1) P^mu_{k-1} + (k-mu+1)/(2k+1) P^mu_{k+1}
        rng = np.random.default_rng(7)
        xs = np.concatenate([rng.uniform(-1, 1, 4), rng.uniform(1.01, 4.0, 4)])
        for k in range(0, 9):
            for mu in range(0, min(k, 3) + 1):
                for x in xs:
                    left = x * sf.assoc_legendre_p(k, mu, x)
                    lo = 0.0 if k - 1 < mu else sf.assoc_legendre_p(k - 1, mu, x)
                    hi = sf.assoc_legendre_p(k + 1, mu, x)
                    right = (k + mu) / (2 * k + 1) * lo + (k - mu + 1) / (2 * k + 1) * hi
                    assert left == pytest.approx(right, rel=1e-12, abs=1e-12)


def _legendre_ode_residual(f, tau, nu, x):
    """Residual of (1-x^2) y'' - 2x y' + [tau(tau+1) - nu^2/(1-x^2)] y at x (mpf)."""
    with mpmath.workdps(40):
        x = mpmath.mpf(x)
        h = mpmath.mpf("1e-8")
        y0 = f(tau, nu, x)
        yp = (f(tau, nu, x + h) - f(tau, nu, x - h)) / (2 * h)
        ypp = (f(tau, nu, x + h) - 2 * y0 + f(tau, nu, x - h)) / (h * h)
        res = ((1 - x * x) * ypp - 2 * x * yp
               + (tau * (tau + 1) - nu * nu / (1 - x * x)) * y0)
        scale = 1 + abs(y0) + abs(yp) + abs(ypp)
        return float(abs(res) / scale)


class TestLegendreODE:
    def test_p_satisfies_ode(self):
        rng = np.random.default_rng(11)
        for tau in range(0, 6):
            for nu in range(0, tau + 1):
                for x in rng.uniform(-0.9, 0.9, 2):
                    assert _legendre_ode_residual(sf.assoc_legendre_p, tau, nu, x) < 1e-10
                for x in rng.uniform(1.05, 3.0, 2):
                    assert _legendre_ode_residual(sf.assoc_legendre_p, tau, nu, x) < 1e-10

    def test_q_satisfies_ode(self):
        rng = np.random.default_rng(13)
        for tau in range(0, 6):
            for nu in range(0, min(tau, 2) + 1):
                for x in rng.uniform(1.05, 3.0, 3):
                    assert _legendre_ode_residual(sf.legendre_q, tau, nu, x) < 1e-10


class TestLegendreQ:
    def test_q0_is_arcoth(self):
        for xi in (1.1, 2.0, 7.5):
            assert sf.legendre_q(0, 0, xi) == pytest.approx(sf.arcoth(xi), rel=1e-15)

    def test_q1_closed_form(self):
        xi = 2.0
        assert sf.legendre_q(1, 0, xi) == pytest.approx(xi * sf.arcoth(xi) - 1, rel=1e-14)

    def test_q_against_integral_representation(self):
        # Neumann's integral: d^nu/dxi^nu Q_tau = (-1)^nu nu!/2 * I with
        # I = int_{-1}^{1} P_tau(t) (xi - t)^{-nu-1} dt, an independent route.
        cases = [(3, 2, 1.7), (4, 1, 1.3), (5, 0, 2.4), (2, 2, 1.2)]
        for tau, nu, xi in cases:
            val = oracle.quad(
                lambda t: sf.assoc_legendre_p(tau, 0, t) / (xi - t) ** (nu + 1),
                -1.0, 1.0, dps=35)
            ref = float((-1) ** nu * math.factorial(nu) / 2 * val) \
                * (xi * xi - 1) ** (nu / 2)
            assert sf.legendre_q(tau, nu, xi) == pytest.approx(ref, rel=1e-13)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            sf.legendre_q(2, 0, 1.0)
        with pytest.raises(ValueError):
            sf.legendre_q(2, 0, 0.5)
        with pytest.raises(ValueError):
            sf.legendre_q(5, 3, 1.5)
        with pytest.raises(ValueError):
            sf.legendre_q(1, 2, 1.5)


class TestWigner3j:
    def test_closed_form_ll0(self):
        # (l, l, 0; 0, 0, 0) = (-1)^l / sqrt(2l+1)
        for l in range(0, 5):
            assert sf.wigner_3j(l, l, 0, 0, 0, 0) == pytest.approx(
                (-1) ** l / math.sqrt(2 * l + 1), rel=1e-14)

    def test_odd_sum_zero(self):
        assert sf.wigner_3j(1, 1, 1, 0, 0, 0) == 0.0

    def test_selection_rules_exact_zero(self):
        assert sf.wigner_3j(1, 1, 3, 0, 0, 0) == 0.0       # triangle
        assert sf.wigner_3j(2, 2, 2, 1, 0, 0) == 0.0       # m-sum
        assert sf.wigner_3j(2, 2, 2, 3, -3, 0) == 0.0      # |m| > l

    def test_against_independent_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            l1, l2 = rng.integers(0, 6, 2)
            l3 = rng.integers(abs(l1 - l2), l1 + l2 + 1)
            m1 = rng.integers(-l1, l1 + 1)
            m2 = rng.integers(-l2, l2 + 1)
            m3 = -m1 - m2
            ref = float(spw.wigner_3j(int(l1), int(l2), int(l3),
                                      int(m1), int(m2), int(m3)))
            assert sf.wigner_3j(l1, l2, l3, m1, m2, m3) == pytest.approx(
                ref, rel=1e-13, abs=1e-15)

    def test_orthogonality(self):
        # sum over m1 (m2 = -m3 - m1) of (2 l3 + 1) 3j(...)^2 = 1 at fixed m3
        for (l1, l2, l3) in [(1, 1, 2), (2, 3, 4), (3, 3, 2), (4, 2, 5)]:
            for m3 in range(-l3, l3 + 1):
                total = 0.0
                for m1 in range(-l1, l1 + 1):
                    total += (2 * l3 + 1) * sf.wigner_3j(l1, l2, l3, m1,
                                                         -m3 - m1, m3) ** 2
                assert total == pytest.approx(1.0, rel=1e-12)


class TestGamma0:
    def test_quadrature_oracle_at_one(self):
        ref = oracle.quad(lambda t: mpmath.exp(-t) / t, 1.0, math.inf, dps=30)
        assert sf.gamma0(1.0) == pytest.approx(float(ref), rel=1e-14)

    def test_derivative_identity(self):
        # d/dz Gamma(0,z) = -exp(-z)/z, checked by central differences
        for z in (0.5, 2.0, 7.0):
            h = 1e-6
            fd = (sf.gamma0(z + h) - sf.gamma0(z - h)) / (2 * h)
            assert fd == pytest.approx(-math.exp(-z) / z, rel=1e-8)

    def test_asymptotics(self):
        z = 500.0
        assert sf.gamma0(z) * math.exp(z) * z == pytest.approx(1.0, abs=5e-3)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            sf.gamma0(0.0)
        with pytest.raises(ValueError):
            sf.gamma0(-2.0)

    def test_scaled_variants_consistent(self):
        for z in (0.3, 1.0, 13.0):
            assert sf.gamma0_scaled(z) == pytest.approx(sf.gamma0(z) * math.exp(z),
                                                        rel=1e-13)
            hi = sf.gamma0_scaled(z, prec=120)
            assert float(hi) == pytest.approx(sf.gamma0_scaled(z), rel=1e-14)
        # huge-z branch agrees with mpmath
        z = 800.0
        ref = float(mpmath.e1(z) * mpmath.exp(z))
        assert sf.gamma0_scaled(z) == pytest.approx(ref, rel=1e-12)


class TestErfcScaled:
    def test_definition_quadrature(self):
        ref = oracle.quad(lambda x: mpmath.exp(-x) / mpmath.sqrt(2 + x),
                          0.0, math.inf, dps=30)
        assert sf.erfc_scaled(1.0) == pytest.approx(float(ref), rel=1e-13)

    def test_asymptotics(self):
        z = 5000.0
        assert sf.erfc_scaled(z) * math.sqrt(2 * z) == pytest.approx(1.0, abs=2e-4)

    def test_extended_precision_evaluation(self):
        with mpmath.workdps(40):
            ref = float(mpmath.sqrt(mpmath.pi) * mpmath.erfc(1) * mpmath.e)
        assert sf.erfc_scaled(0.5) == pytest.approx(ref, rel=1e-14)
        hi = sf.erfc_scaled(0.5, prec=160)
        assert float(hi) == pytest.approx(ref, rel=1e-15)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            sf.erfc_scaled(0.0)


class TestOracleGrid:
    def test_gamma0_and_erfc_scaled_on_log_grid(self):
        for z in np.logspace(math.log10(0.1), math.log10(50.0), 9):
            g_ref = oracle.quad(lambda t: mpmath.exp(-t) / t, z, math.inf, dps=30)
            assert sf.gamma0(z) == pytest.approx(float(g_ref), rel=1e-13)
            w_ref = oracle.quad(lambda x: mpmath.exp(-x) / mpmath.sqrt(2 * z + x),
                                0.0, math.inf, dps=30)
            assert sf.erfc_scaled(z) == pytest.approx(float(w_ref), rel=1e-13)


class TestHarmonic:
    def test_values(self):
        assert sf.harmonic(0) == 0
        assert sf.harmonic(1) == 1
        assert sf.harmonic(4) == Fraction(25, 12)

    def test_recurrence(self):
        for i in range(1, 12):
            assert sf.harmonic(i) - sf.harmonic(i - 1) == Fraction(1, i)

    def test_domain(self):
        with pytest.raises(ValueError):
            sf.harmonic(-1)
