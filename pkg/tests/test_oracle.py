"""Tests of the verification oracles themselves."""

import math

import mpmath
import numpy as np
import pytest

from prolate import oracle


class TestAdaptiveQuad:
    def test_exponential(self):
        spec = oracle.QuadratureSpec(lambda x: mpmath.exp(-x))
        val, err = oracle.adaptive_quad(spec)
        assert float(val) == pytest.approx(1.0, rel=1e-14)
        assert err < 1e-13

    def test_hylleraas_orthonormality(self):
        # H^0_2(x) = e^{-x/2} L_2(x) is unit-normalized on (0, inf)
        f = lambda x: (mpmath.exp(-x) * mpmath.laguerre(2, 0, x) ** 2)
        val = oracle.quad(f, 0, math.inf, dps=30)
        assert float(val) == pytest.approx(1.0, rel=1e-13)

    def test_self_consistency_tolerance_halving(self):
        f = lambda x: mpmath.sqrt(x) * mpmath.exp(-x) * mpmath.log(1 + x)
        v1, e1 = oracle.adaptive_quad(oracle.QuadratureSpec(f, rtol=1e-10))
        v2, e2 = oracle.adaptive_quad(oracle.QuadratureSpec(f, rtol=5e-11))
        assert abs(float(v1 - v2)) <= max(e1, 1e-15 * abs(float(v1)))

    def test_finite_interval_log_singularity(self):
        val = oracle.quad(lambda x: mpmath.log(x), 0.0, 1.0)
        assert float(val) == pytest.approx(-1.0, rel=1e-13)


class TestNestedQuad:
    def test_triangular_exponential(self):
        # int_0^inf e^{-xt} [int_0^xt e^{-x} dx] dxt = 1/2 exactly
        val = oracle.nested_quad(lambda xt, inner: mpmath.exp(-xt) * inner,
                                 lambda x, xt: mpmath.exp(-x))
        assert float(val) == pytest.approx(0.5, rel=1e-12)

    def test_polynomial_weight(self):
        # int_0^inf xt e^{-xt} [int_0^xt x e^{-x} dx] dxt
        # = int xt e^{-xt} (1 - (1+xt) e^{-xt}) = 1 - 1/4 - 1/4 = 1/2
        val = oracle.nested_quad(lambda xt, inner: xt * mpmath.exp(-xt) * inner,
                                 lambda x, xt: x * mpmath.exp(-x))
        assert float(val) == pytest.approx(0.5, rel=1e-12)


class TestFDOrbital:
    def test_united_atom_limit(self):
        # Z=1, R -> 0: the ground state approaches the He+ 1s level E = -2
        # (up to the physical O(R^2) shift).  The xi range scales like 1/(ZR).
        e = oracle.fd_orbital(1, 1, 0.05, 0, grid=(600, 48, 321.0), n_eigs=2)
        assert e[0] == pytest.approx(-2.0, abs=1e-2)
        # first excited sigma state heads toward the n=2 level E = -1/2
        assert e[1] == pytest.approx(-0.5, abs=5e-3)

    def test_m_degeneracy(self):
        e_plus = oracle.fd_orbital(1, 1, 2.0, 1, grid=(160, 80, 14.0), n_eigs=2)
        e_minus = oracle.fd_orbital(1, 1, 2.0, -1, grid=(160, 80, 14.0), n_eigs=2)
        assert np.allclose(e_plus, e_minus, rtol=0, atol=1e-14)

    def test_hydrogen_molecular_ion_ground_state(self):
        # H2+ at R = 2.0: E(1s sigma_g) = -1.1026342144949 (known to high accuracy)
        coarse = oracle.fd_orbital(1, 1, 2.0, 0, grid=(180, 90, 16.0), n_eigs=1)[0]
        fine = oracle.fd_orbital(1, 1, 2.0, 0, grid=(360, 180, 16.0), n_eigs=1)[0]
        richardson = fine + (fine - coarse) / 3.0
        assert richardson == pytest.approx(-1.1026342144949, abs=5e-5)
