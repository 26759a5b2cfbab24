"""Special functions shared by every other module.

Both Legendre branches (angular ``|x| <= 1`` and radial ``xi > 1``) use a
real-valued convention without the Condon-Shortley phase:

    P^nu_tau(x)  = (1 - x^2)^{nu/2} * d^nu P_tau(x) / dx^nu     (|x| <= 1)
    P^nu_tau(xi) = (xi^2 - 1)^{nu/2} * d^nu P_tau(xi) / dxi^nu  (xi > 1)

Second-kind functions on the radial branch split into a rational part and an
``arcoth`` part,

    Q^nu_tau(xi) = G^nu_tau(xi) / (xi^2 - 1)^{nu/2} + P^nu_tau(xi) * arcoth(xi),

with a polynomial G^nu_tau of degree tau - 1 + nu that is generated once in
exact rational arithmetic and cached.  The module also provides exact Wigner
3j symbols, the scaled incomplete-gamma and complementary-error functions,
harmonic numbers, and helpers for extended-precision (MPFR) scalar work.

All polynomial coefficient tables are tuples of ``fractions.Fraction`` in
ascending powers; evaluation works for ``float``, ``mpmath.mpf``,
``gmpy2.mpfr`` and any type implementing arithmetic with ``Fraction``.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from fractions import Fraction
from functools import lru_cache

import gmpy2
import mpmath
import numpy as np
from scipy import special as _sp

__all__ = [
    "assoc_legendre_p",
    "legendre_q",
    "arcoth",
    "legendre_poly_coeffs",
    "legendre_p_coeffs",
    "legendre_g_coeffs",
    "wigner_3j",
    "gamma0",
    "gamma0_scaled",
    "erfc_scaled",
    "harmonic",
    "poly_eval",
    "convert_coeffs",
    "working_precision",
    "to_mpfr",
    "mpfr_digits",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)


# ---------------------------------------------------------------------------
# exact polynomial helpers (tuples of Fraction, ascending powers)
# ---------------------------------------------------------------------------

def _poly_add(a, b):
    n = max(len(a), len(b))
    return tuple((a[i] if i < len(a) else _ZERO) + (b[i] if i < len(b) else _ZERO)
                 for i in range(n))


def _poly_scale(a, s):
    s = Fraction(s)
    return tuple(c * s for c in a)


def _poly_mul(a, b):
    if not a or not b:
        return ()
    out = [_ZERO] * (len(a) + len(b) - 1)
    for i, ca in enumerate(a):
        if ca:
            for j, cb in enumerate(b):
                out[i + j] += ca * cb
    return tuple(out)


def _poly_shift(a, k=1):
    """Multiply by x^k."""
    return (_ZERO,) * k + tuple(a) if a else ()


def _poly_deriv(a, order=1):
    for _ in range(order):
        a = tuple(a[i] * i for i in range(1, len(a)))
    return a


def _poly_trim(a):
    n = len(a)
    while n > 0 and a[n - 1] == 0:
        n -= 1
    return tuple(a[:n])


def poly_eval(coeffs, x):
    """Evaluate a coefficient tuple (ascending powers) at ``x`` by Horner.

    Coefficients may be Fraction/int; ``x`` may be float, mpf, mpfr, or any
    type with Fraction-compatible arithmetic (e.g. truncated Taylor scalars).
    """
    coeffs = convert_coeffs(coeffs, x)
    acc = 0 * x
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def convert_coeffs(coeffs, like):
    """Convert exact coefficients to a representation matched to ``like``."""
    if isinstance(like, (float, int, np.floating, np.integer)):
        return tuple(float(c) for c in coeffs)
    if isinstance(like, (gmpy2.mpfr, gmpy2.mpq)):
        return tuple(gmpy2.mpq(Fraction(c)) for c in coeffs)
    return tuple(Fraction(c) for c in coeffs)


# ---------------------------------------------------------------------------
# Legendre polynomials of both kinds
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def legendre_poly_coeffs(tau):
    """Exact coefficients of the Legendre polynomial P_tau."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return (_ONE,)
    if tau == 1:
        return (_ZERO, _ONE)
    p1 = legendre_poly_coeffs(tau - 1)
    p2 = legendre_poly_coeffs(tau - 2)
    rec = _poly_add(_poly_scale(_poly_shift(p1), Fraction(2 * tau - 1, tau)),
                    _poly_scale(p2, Fraction(-(tau - 1), tau)))
    return _poly_trim(rec)


@lru_cache(maxsize=None)
def legendre_p_coeffs(tau, nu):
    """Exact coefficients of d^nu P_tau / dx^nu (the polynomial factor of P^nu_tau)."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    return _poly_trim(_poly_deriv(legendre_poly_coeffs(tau), nu))


@lru_cache(maxsize=None)
def _legendre_v_coeffs(tau):
    """Polynomial part V_tau of Q_tau = P_tau * arcoth - V_tau."""
    if tau == 0:
        return ()
    if tau == 1:
        return (_ONE,)
    v1 = _legendre_v_coeffs(tau - 1)
    v2 = _legendre_v_coeffs(tau - 2)
    rec = _poly_add(_poly_scale(_poly_shift(v1), Fraction(2 * tau - 1, tau)),
                    _poly_scale(v2, Fraction(-(tau - 1), tau)))
    return _poly_trim(rec)


@lru_cache(maxsize=None)
def _arcoth_deriv_numerator(j):
    """p_j with d^j arcoth / dxi^j = p_j(xi) / (xi^2 - 1)^j, j >= 1."""
    if j == 1:
        return (Fraction(-1),)
    p = _arcoth_deriv_numerator(j - 1)
    sq = (Fraction(-1), _ZERO, _ONE)  # xi^2 - 1
    return _poly_trim(_poly_add(_poly_mul(sq, _poly_deriv(p)),
                                _poly_scale(_poly_shift(p), -2 * (j - 1))))


@lru_cache(maxsize=None)
def legendre_g_coeffs(tau, nu):
    """Exact coefficients of G^nu_tau in the arcoth split of Q^nu_tau."""
    if nu < 0 or tau < 0:
        raise ValueError("tau, nu must be >= 0")
    sq = (Fraction(-1), _ZERO, _ONE)  # xi^2 - 1
    total = ()
    for j in range(1, nu + 1):
        term = _poly_mul(legendre_p_coeffs(tau, nu - j), _arcoth_deriv_numerator(j))
        term = _poly_scale(term, math.comb(nu, j))
        for _ in range(nu - j):
            term = _poly_mul(term, sq)
        total = _poly_add(total, term)
    vpart = _poly_deriv(_legendre_v_coeffs(tau), nu)
    for _ in range(nu):
        vpart = _poly_mul(vpart, sq)
    total = _poly_add(total, _poly_scale(vpart, -1))
    return _poly_trim(total)


def _sqrt_like(v):
    if isinstance(v, gmpy2.mpfr):
        return gmpy2.sqrt(v)
    if isinstance(v, (mpmath.mpf, mpmath.mpc)):
        return mpmath.sqrt(v)
    if isinstance(v, (float, int, np.floating, np.integer)):
        return math.sqrt(v)
    return v.sqrt()


def _half_power(s, nu):
    """s^{nu/2} with the square root taken only for odd nu."""
    half = nu // 2
    out = s ** half if half else 1
    if nu % 2:
        out = _sqrt_like(s) * out
    return out


def assoc_legendre_p(tau, nu, x):
    """Associated Legendre function of the first kind, both real branches.

    No Condon-Shortley phase: the square-root factor is (1-x^2)^{nu/2} for
    |x| <= 1 and (x^2-1)^{nu/2} for x > 1, both taken positive.
    """
    if nu < 0 or nu > tau:
        raise ValueError(f"require 0 <= nu <= tau, got nu={nu}, tau={tau}")
    val = poly_eval(legendre_p_coeffs(tau, nu), x)
    if nu == 0:
        return val
    s = x * x - 1
    if s < 0:
        s = -s
    return val * _half_power(s, nu)


def arcoth(xi):
    """arcoth(xi) = (1/2) log((xi+1)/(xi-1)) for xi > 1."""
    if isinstance(xi, gmpy2.mpfr):
        return gmpy2.log((xi + 1) / (xi - 1)) / 2
    if isinstance(xi, (mpmath.mpf, mpmath.mpc)):
        return mpmath.log((xi + 1) / (xi - 1)) / 2
    if isinstance(xi, (float, int, np.floating, np.integer)):
        return 0.5 * math.log((xi + 1.0) / (xi - 1.0))
    return ((xi + 1) / (xi - 1)).log() / 2


def legendre_q(tau, nu, xi):
    """Associated Legendre function of the second kind on the radial branch.

    Evaluates Q^nu_tau(xi) = G^nu_tau(xi)/(xi^2-1)^{nu/2} + P^nu_tau(xi) arcoth(xi)
    for xi > 1 and nu in {0, 1, 2}.
    """
    if nu not in (0, 1, 2):
        raise ValueError("nu must be 0, 1 or 2")
    if nu > tau:
        raise ValueError(f"require nu <= tau, got nu={nu}, tau={tau}")
    if not xi > 1:
        raise ValueError("xi must be > 1 (logarithmic singularity at xi = 1)")
    g = poly_eval(legendre_g_coeffs(tau, nu), xi)
    p = assoc_legendre_p(tau, nu, xi)
    if nu == 0:
        return g + p * arcoth(xi)
    s = xi * xi - 1
    return g / _half_power(s, nu) + p * arcoth(xi)


# ---------------------------------------------------------------------------
# Wigner 3j symbols (exact Racah sum)
# ---------------------------------------------------------------------------

def _triangle_ok(l1, l2, l3):
    return abs(l1 - l2) <= l3 <= l1 + l2


def wigner_3j(l1, l2, l3, m1, m2, m3):
    """Wigner 3j symbol, evaluated exactly and returned as float.

    Selection-rule failures (m1+m2+m3 != 0, triangle violation, |m| > l)
    return exactly 0.0.
    """
    for l, m in ((l1, m1), (l2, m2), (l3, m3)):
        if l < 0 or abs(m) > l:
            return 0.0
    if m1 + m2 + m3 != 0 or not _triangle_ok(l1, l2, l3):
        return 0.0
    # Racah's formula with an exact rational sum.
    f = math.factorial
    delta = Fraction(f(l1 + l2 - l3) * f(l1 - l2 + l3) * f(-l1 + l2 + l3),
                     f(l1 + l2 + l3 + 1))
    norm = delta * (f(l1 + m1) * f(l1 - m1) * f(l2 + m2) * f(l2 - m2)
                    * f(l3 + m3) * f(l3 - m3))
    t_min = max(0, l2 - l3 - m1, l1 - l3 + m2)
    t_max = min(l1 + l2 - l3, l1 - m1, l2 + m2)
    s = Fraction(0)
    for t in range(t_min, t_max + 1):
        den = (f(t) * f(l3 - l2 + t + m1) * f(l3 - l1 + t - m2)
               * f(l1 + l2 - l3 - t) * f(l1 - t - m1) * f(l2 + m2 - t))
        s += Fraction((-1) ** t, den)
    if s == 0:
        return 0.0
    sign = (-1 if (l1 - l2 - m3) % 2 else 1) * (1 if s > 0 else -1)
    mag2 = s * s * norm  # exact rational square of the magnitude
    return sign * math.sqrt(float(mag2))


# ---------------------------------------------------------------------------
# scaled incomplete gamma / complementary error function, harmonic numbers
# ---------------------------------------------------------------------------

def gamma0(z):
    """Upper incomplete gamma Gamma(0, z) = integral_z^inf e^{-t}/t dt, z > 0."""
    if not z > 0:
        raise ValueError("z must be > 0")
    return float(_sp.exp1(z))


def gamma0_scaled(z, prec=None):
    """Gamma(0, z) * e^z.

    With ``prec`` unset returns a float; otherwise a gmpy2.mpfr carrying
    ``prec`` bits (seeded from mpmath at matching accuracy).
    """
    if not z > 0:
        raise ValueError("z must be > 0")
    if prec is None:
        if z < 700:
            return float(_sp.exp1(z)) * math.exp(z)
        # asymptotic tail, |error| < 13!/z^13 relative
        acc, term = 0.0, 1.0 / z
        for k in range(1, 13):
            acc += term
            term *= -k / z
        return acc + term
    return to_mpfr(_with_dps(prec, lambda: mpmath.e1(z) * mpmath.exp(z)), prec)


def erfc_scaled(z, prec=None):
    """w0(z) = sqrt(pi) * erfc(sqrt(2z)) * e^{2z}, evaluated without overflow."""
    if not z > 0:
        raise ValueError("z must be > 0")
    if prec is None:
        return math.sqrt(math.pi) * float(_sp.erfcx(math.sqrt(2.0 * z)))
    def body():
        s = mpmath.sqrt(2 * mpmath.mpf(z))
        return mpmath.sqrt(mpmath.pi) * mpmath.erfc(s) * mpmath.exp(s * s)
    return to_mpfr(_with_dps(prec, body), prec)


@lru_cache(maxsize=None)
def harmonic(i):
    """Harmonic number H_i as an exact Fraction (H_0 = 0)."""
    if i < 0:
        raise ValueError("i must be >= 0")
    if i == 0:
        return Fraction(0)
    return harmonic(i - 1) + Fraction(1, i)


# ---------------------------------------------------------------------------
# extended-precision helpers (gmpy2-backed)
# ---------------------------------------------------------------------------

@contextmanager
def working_precision(bits):
    """Context manager setting the gmpy2 working precision in bits."""
    with gmpy2.context(precision=int(bits)) as ctx:
        yield ctx


def mpfr_digits(bits):
    """Decimal digits carried by ``bits`` of mantissa."""
    return int(bits / 3.3219280948873626) + 1


def _with_dps(prec_bits, body):
    """Run ``body`` under an mpmath working precision matching prec_bits."""
    old = mpmath.mp.prec
    mpmath.mp.prec = int(prec_bits) + 8
    try:
        return body()
    finally:
        mpmath.mp.prec = old


def to_mpfr(x, prec):
    """Convert float/str/mpmath values to gmpy2.mpfr at ``prec`` bits."""
    with gmpy2.context(precision=int(prec)):
        if isinstance(x, mpmath.mpf):
            sign_bit, man, exp, _ = x._mpf_
            if man == 0:
                return gmpy2.mpfr(0)
            val = gmpy2.mpfr(man) * gmpy2.exp2(exp)
            return -val if sign_bit else val
        return gmpy2.mpfr(x)
