"""Closed-form catalogue of Laguerre-type integrals.

Together these evaluate, without any numeric quadrature,

* ``int_exp_cutoff``    --  integral_0^z L^mu_k(y x) e^{-x} dx,
* ``t_matrix``          --  nested double integrals of H-type functions,
* ``int_inv_xz``        --  integral_0^inf L^mu_k(y x) e^{-x} / (x+z) dx,
* ``int_log_over``      --  integral_0^inf log(x/z) L^mu_k(y x) e^{-x} dx,
* ``int_arcoth_nested`` --  the nested arcoth integral entering the tau = nu
                            part of the radial Coulomb kernels,
* ``w_sequence``        --  integral_0^inf L_k(x) e^{-x} (2z+x)^{-1/2} dx,
* ``sqrt_expansion``    --  Laguerre coefficients of (2z+x)^{-1/2} H^mu_k.

Everything is a finite combination of exact rationals and the transcendental
seeds Gamma(0,z) e^z, log z, the Euler constant, and
w0 = sqrt(pi) erfc(sqrt(2z)) e^{2z}; intermediate cancellations are absorbed
by computing with gmpy2 floats at an automatically chosen precision.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction

import gmpy2
import numpy as np

from .. import lagalg, specfun

__all__ = ["int_exp_cutoff", "t_matrix", "int_inv_xz", "int_log_over",
           "int_arcoth_nested", "w_sequence", "sqrt_expansion"]


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def laguerre_sequence(mu, kmax, u, one=1):
    """[L^mu_0(u), .., L^mu_kmax(u)] by upward recurrence; generic scalar."""
    vals = [one]
    if kmax >= 1:
        vals.append(one * (mu + 1) - u)
    for k in range(1, kmax):
        vals.append(((2 * k + mu + 1) * vals[k] - u * vals[k]
                     - (k + mu) * vals[k - 1]) / (k + 1))
    return vals


def _auto_prec(mu, k, y, z, extra=0):
    """Bits needed to absorb the L^mu_k(-y z) * Gamma cancellation."""
    u = abs(float(y)) * float(z)
    growth = 2.0 * math.sqrt(max(k + mu, 1) * max(u, 1.0)) + \
        math.log(math.comb(k + mu, k) + 1.0) + 0.7 * (k + mu)
    return 96 + extra + int(1.45 * growth)


def _q1_coefficient(mu, k):
    """q1^mu_k = (-1)^k + sum_{i<k} (-1)^{k-1-i} C(i+mu, i+1), exact int."""
    acc = (-1) ** k
    for i in range(k):
        acc += (-1) ** (k - 1 - i) * math.comb(i + mu, i + 1)
    return acc


def _q2_coefficients(mu, k, ktilde):
    """q2^mu_{k ktilde j} for j = 0..k+ktilde, exact integers.

    Assembled from the triple-product coefficients c^{mu mu 0}(1); raises if
    any assembled value fails to be an integer.
    """
    c = lagalg.laguerre_c_coeffs((mu, mu, 0), 1, (k, ktilde, k + ktilde))
    out = []
    for j in range(k + ktilde + 1):
        val = c[k, ktilde, j]
        for i in range(max(j - ktilde, 0), k):
            val += 2 * (-1) ** (k - i) * c[i, ktilde, j]
        frac = Fraction(val)
        if frac.denominator != 1:
            raise AssertionError(f"q2 coefficient not integral: {frac}")
        out.append(int(frac))
    return out


# ---------------------------------------------------------------------------
# exponential integrals with an upper cutoff
# ---------------------------------------------------------------------------

def int_exp_cutoff(mu: int, k: int, y, z) -> float:
    """integral_0^z L^mu_k(y x) e^{-x} dx; ``z = math.inf`` gives the limit."""
    if k < 0 or mu < 0:
        raise ValueError("k and mu must be >= 0")
    yf = Fraction(y) if not isinstance(y, float) else y
    one_minus_y = 1 - yf
    if math.isinf(z):
        acc = one_minus_y ** k
        for i in range(k):
            acc += one_minus_y ** (k - 1 - i) * math.comb(i + mu, i + 1)
        return float(acc)
    lag = laguerre_sequence(mu, k, yf * z, one=1.0 if isinstance(yf * z, float)
                            else Fraction(1))
    emz = math.exp(-z)
    acc = one_minus_y ** k - lag[k] * emz
    for i in range(k):
        acc += one_minus_y ** (k - 1 - i) * (yf * lag[i] * emz
                                             + math.comb(i + mu, i + 1))
    return float(acc)


# ---------------------------------------------------------------------------
# nested t-integrals
# ---------------------------------------------------------------------------

def _t0_matrix(K):
    t = np.zeros((K, K), dtype=np.int64)
    for k in range(K):
        t[k, k] = 1
        for kt in range(k + 1, K):
            t[k, kt] = 2 * (-1) ** (k + kt)
    return t


def _cumsum_pair(mat):
    """Double cumulative sum: out[a,b] = sum_{i<=a, j<=b} mat[i,j]."""
    return np.cumsum(np.cumsum(mat, axis=0), axis=1)


def t_matrix_general(mu: int, K: int) -> np.ndarray:
    """t^mu for any mu >= 0 via L^{mu}_k = sum_{j<=k} L^{mu-1}_j."""
    t = _t0_matrix(K)
    for _ in range(mu):
        t = _cumsum_pair(t)
    return t


def t_matrix(mu: int, K: int) -> np.ndarray:
    """The integer matrices t^0 and t^1 (row k = inner, column = outer)."""
    if mu == 0:
        return _t0_matrix(K)
    if mu == 1:
        t = np.zeros((K, K), dtype=np.int64)
        for k in range(K):
            for kt in range(K):
                if k <= kt and k % 2 == 0:
                    t[k, kt] = (-1) ** kt
                elif k > kt and kt % 2 == 0:
                    t[k, kt] = 1
        return t
    raise ValueError("closed-form t-matrices exist for mu in {0, 1} only; "
                     "use the nested closed forms for higher mu")


# ---------------------------------------------------------------------------
# inverse-linear integrals
# ---------------------------------------------------------------------------

def h_coefficient(mu: int, k: int, i: int, y) -> Fraction:
    """h^mu_{k i}(y) = sum_{n=i}^{k} (-y)^{n-i} C(k+mu, n+mu) / C(n, i)."""
    yf = Fraction(y)
    acc = Fraction(0)
    for n in range(i, k + 1):
        acc += (-yf) ** (n - i) * Fraction(math.comb(k + mu, n + mu),
                                           math.comb(n, i))
    return acc


def _int_inv_xz_mp(mu, k, y, z, prec):
    """mpfr value of integral L^mu_k(y x) e^{-x} / (x+z) dx at ``prec`` bits."""
    with specfun.working_precision(prec):
        zf = gmpy2.mpfr(z)
        g1 = specfun.gamma0_scaled(float(z), prec)
        u = -gmpy2.mpfr(Fraction(y).numerator) / Fraction(y).denominator * zf \
            if not isinstance(y, float) else gmpy2.mpfr(-y) * zf
        lag = laguerre_sequence(mu, k, u, one=gmpy2.mpfr(1))
        acc = lag[k] * g1
        if k >= 1:
            yz = -u  # y z as mpfr
            term = gmpy2.mpfr(1)
            s = gmpy2.mpfr(0)
            for i in range(1, k + 1):
                term = term * yz / i  # (y z)^i / i!
                h = h_coefficient(mu, k, i, y)
                s += term * gmpy2.mpq(h.numerator, h.denominator)
            acc -= s / zf
        return acc


def int_inv_xz(mu: int, k: int, y, z: float) -> float:
    """integral_0^inf L^mu_k(y x) e^{-x} / (x+z) dx, z > 0."""
    if not z > 0:
        raise ValueError("z must be > 0")
    return float(_int_inv_xz_mp(mu, k, y, z, _auto_prec(mu, k, y, z)))


# ---------------------------------------------------------------------------
# logarithmic integrals
# ---------------------------------------------------------------------------

def _int_log_over_mp(mu, k, y, z, prec):
    """mpfr value of integral log(x/z) L^mu_k(y x) e^{-x} dx."""
    yf = Fraction(y)
    with specfun.working_precision(prec):
        acc = gmpy2.mpfr(0)
        for i in range(1, k + 1):
            hi = specfun.harmonic(i)
            coef = math.comb(k + mu, i + mu) * (-yf) ** i * hi
            acc += gmpy2.mpq(coef.numerator, coef.denominator)
        weight = (1 - yf) ** k
        for i in range(1, k + 1):
            weight += mu * Fraction(math.comb(k, i), i + mu) * yf ** i \
                * (1 - yf) ** (k - i)
        weight *= math.comb(k + mu, k)
        gamma_log = gmpy2.const_euler() + gmpy2.log(gmpy2.mpfr(z))
        return acc - gmpy2.mpq(weight.numerator, weight.denominator) * gamma_log


def int_log_over(mu: int, k: int, y, z: float) -> float:
    """integral_0^inf log(x/z) L^mu_k(y x) e^{-x} dx, z > 0."""
    if not z > 0:
        raise ValueError("z must be > 0")
    prec = 96 + 4 * (k + mu)
    return float(_int_log_over_mp(mu, k, y, z, prec))


def _int_log1p_over_x_mp(mu, k, y, z, prec):
    """mpfr value of integral log(1 + z/x) L^mu_k(y x) e^{-x} dx.

    Uses log(1 + z/x) = log(1 + x/z) - log(x/z) and the inverse-linear
    closed form for the first part.
    """
    yf = Fraction(y)
    with specfun.working_precision(prec):
        acc = _int_inv_xz_mp(mu, k, y, z, prec)
        for i in range(k):
            coef = yf * (1 - yf) ** (k - 1 - i)
            acc -= gmpy2.mpq(coef.numerator, coef.denominator) \
                * _int_inv_xz_mp(mu, i, y, z, prec)
        return acc - _int_log_over_mp(mu, k, y, z, prec)


# ---------------------------------------------------------------------------
# the nested arcoth integral
# ---------------------------------------------------------------------------

def int_arcoth_nested(mu: int, k: int, ktilde: int, z: float) -> float:
    """Nested integral of arcoth(1 + x~/z) against H-type Laguerre factors.

    Evaluates
      integral_0^inf L^mu_kt(x~) e^{-x~/2} arcoth(1 + x~/z)
                     integral_0^x~ L^mu_k(x) e^{-x/2} dx dx~
    as  2 q1_k * integral L^mu_kt(2x) e^{-x} log(1 + z/x) dx
        - sum_j q2_{k kt j} * integral L^0_j(x) e^{-x} log(1 + 2z/x) dx
    with exact integer coefficients q1, q2.
    """
    if not z > 0:
        raise ValueError("z must be > 0")
    q1 = _q1_coefficient(mu, k)
    q2 = _q2_coefficients(mu, k, ktilde)
    prec = _auto_prec(mu, k + ktilde, 2, 2 * z,
                      extra=2 * (k + ktilde + mu) + 64)
    with specfun.working_precision(prec):
        acc = 2 * q1 * _int_log1p_over_x_mp(mu, ktilde, 2, z, prec)
        for j, q in enumerate(q2):
            if q:
                acc -= q * _int_log1p_over_x_mp(0, j, 1, 2 * z, prec)
        return float(acc)


# ---------------------------------------------------------------------------
# inverse-square-root integrals
# ---------------------------------------------------------------------------

def _w_v_sequences(kmax, z, prec):
    """mpfr vectors w_k and v_k = integral L_k(x) e^{-x} (2z+x)^{+1/2} dx."""
    with specfun.working_precision(prec):
        zf = gmpy2.mpfr(z)
        sqrt2z = gmpy2.sqrt(2 * zf)
        w = [specfun.erfc_scaled(float(z), prec)]
        v = [w[0] / 2 + sqrt2z]
        sv = v[0]
        for m in range(kmax):
            wm1 = w[m - 1] if m >= 1 else gmpy2.mpfr(0)
            w.append(((2 * m + 1 + 2 * zf) * w[m] - m * wm1 - v[m]) / (m + 1))
            vm = w[m + 1] / 2 + sqrt2z - sv
            v.append(vm)
            sv += vm
        return w, v


def _w_prec(kmax, z):
    return 96 + int(5.8 * math.sqrt(2.0 * z * max(kmax, 1)) + 2.2 * math.sqrt(max(kmax, 1)))


def w_sequence(kmax: int, z: float) -> np.ndarray:
    """w_k(z) = integral_0^inf L_k(x) e^{-x} (2z+x)^{-1/2} dx for k <= kmax.

    w_0 comes from the scaled complementary error function; the higher
    entries follow from the closed-form recurrence obtained by applying the
    z-derivative analytically (expressed through the companion integrals
    with weight (2z+x)^{+1/2}, which keeps every step rational).
    """
    if not z > 0:
        raise ValueError("z must be > 0")
    w, _ = _w_v_sequences(kmax, z, _w_prec(kmax, z))
    return np.array([float(x) for x in w], dtype=float)


def sqrt_expansion(mu: int, k: int, z: float, Ktilde: int) -> np.ndarray:
    """Coefficients sigma_i of (2z+x)^{-1/2} H^mu_k(x) = sum_i sigma_i H^mu_i.

    Each coefficient is the overlap integral
    sigma_i = integral (2z+x)^{-1/2} H^mu_k(x) H^mu_i(x) dx, evaluated by
    expanding x^mu L^mu_k L^mu_i over plain Laguerre polynomials (product
    coefficients at argument 1) and contracting with ``w_sequence``.
    """
    if not z > 0:
        raise ValueError("z must be > 0")
    if Ktilde < 1:
        raise ValueError("Ktilde must be >= 1")
    strip = lagalg.strip_weights(mu, k)          # x^mu L^mu_k over L^0_a
    amax = k + mu
    imax = Ktilde - 1
    c = lagalg.laguerre_c_coeffs((0, mu, 0), 1, (amax, imax, amax + imax))
    mmax = amax + imax
    prec = _w_prec(mmax, z) + 32
    w, _ = _w_v_sequences(mmax, z, prec)
    with specfun.working_precision(prec):
        g = [gmpy2.sqrt(gmpy2.mpq(math.factorial(i),
                                  math.factorial(i + mu)))
             for i in range(Ktilde)]
        gk = gmpy2.sqrt(gmpy2.mpq(math.factorial(k), math.factorial(k + mu)))
        out = np.empty(Ktilde, dtype=float)
        for i in range(Ktilde):
            acc = gmpy2.mpfr(0)
            for a in range(amax + 1):
                sw = strip[a]
                if not sw:
                    continue
                inner = gmpy2.mpfr(0)
                for m in range(a + i + 1):
                    cc = c[a, i, m]
                    if cc:
                        q = Fraction(cc)
                        inner += gmpy2.mpq(q.numerator, q.denominator) * w[m]
                acc += int(sw) * inner
            out[i] = float(gk * g[i] * acc)
    peak = np.max(np.abs(out))
    if peak > 0 and abs(out[-1]) > 1e-12 * peak:
        warnings.warn(
            f"sqrt_expansion(mu={mu}, k={k}, z={z}): trailing coefficient "
            f"{out[-1]:.3e} has not decayed below 1e-12 of the peak "
            f"{peak:.3e}; increase Ktilde", RuntimeWarning)
    return out
