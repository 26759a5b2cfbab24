"""Truncated Taylor-series (jet) arithmetic over gmpy2 extended floats.

A jet of order ``n`` at an expansion point ``z0`` stores the coefficients
``a_0 .. a_n`` of ``f(z) = sum_i a_i (z - z0)^i + O((z-z0)^{n+1})``.
Arithmetic on jets propagates all derivatives through any closed-form
expression evaluated with them, so the same code that evaluates a kernel
matrix at a point also yields its Taylor coefficients when fed jets of
positive order.  Order 0 reduces to plain scalar arithmetic.

All operations use the precision of the active gmpy2 context; callers are
expected to wrap computations in ``specfun.working_precision``.
"""

from __future__ import annotations

from fractions import Fraction

import gmpy2

from .. import specfun

__all__ = ["Jet", "ZAtoms", "z_atoms"]


def _to_scalar(v):
    """Coerce a numeric constant to something gmpy2 arithmetic accepts."""
    if isinstance(v, (gmpy2.mpfr, gmpy2.mpq, int)):
        return v
    if isinstance(v, Fraction):
        return gmpy2.mpq(v.numerator, v.denominator)
    return gmpy2.mpfr(v)


class Jet:
    """Degree-truncated Taylor series with mpfr coefficients."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = list(coeffs)

    # -- constructors ------------------------------------------------------
    @staticmethod
    def constant(value, order):
        zero = gmpy2.mpfr(0)
        c = [zero] * (order + 1)
        c[0] = gmpy2.mpfr(_to_scalar(value))
        return Jet(c)

    @staticmethod
    def variable(z0, order):
        c = [gmpy2.mpfr(0)] * (order + 1)
        c[0] = gmpy2.mpfr(_to_scalar(z0))
        if order >= 1:
            c[1] = gmpy2.mpfr(1)
        return Jet(c)

    # -- helpers -----------------------------------------------------------
    @property
    def order(self):
        return len(self.c) - 1

    def __float__(self):
        return float(self.c[0])

    def __repr__(self):
        return f"Jet({[float(v) for v in self.c]})"

    def _like(self, value):
        return Jet.constant(value, self.order)

    # -- ring operations ---------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet([a + b for a, b in zip(self.c, other.c)])
        out = list(self.c)
        out[0] = out[0] + _to_scalar(other)
        return Jet(out)

    __radd__ = __add__

    def __neg__(self):
        return Jet([-a for a in self.c])

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet([a - b for a, b in zip(self.c, other.c)])
        out = list(self.c)
        out[0] = out[0] - _to_scalar(other)
        return Jet(out)

    def __rsub__(self, other):
        out = [-a for a in self.c]
        out[0] = out[0] + _to_scalar(other)
        return Jet(out)

    def __mul__(self, other):
        a = self.c
        if not isinstance(other, Jet):
            s = _to_scalar(other)
            return Jet([ai * s for ai in a])
        b = other.c
        n = len(a)
        # truncated Cauchy product, skipping zero partners
        out = []
        for k in range(n):
            acc = gmpy2.mpfr(0)
            for i in range(k + 1):
                ai = a[i]
                if ai:
                    bj = b[k - i]
                    if bj:
                        acc += ai * bj
            out.append(acc)
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a = self.c
        if not isinstance(other, Jet):
            s = _to_scalar(other)
            return Jet([ai / s for ai in a])
        b = other.c
        n = len(a)
        out = [a[0] / b[0]]
        for k in range(1, n):
            acc = a[k]
            for i in range(k):
                ci = out[i]
                if ci:
                    bj = b[k - i]
                    if bj:
                        acc -= ci * bj
            out.append(acc / b[0])
        return Jet(out)

    def __rtruediv__(self, other):
        return self._like(other) / self

    def sqrt(self):
        a = self.c
        n = len(a)
        s0 = gmpy2.sqrt(a[0])
        out = [s0]
        two_s0 = s0 + s0
        for k in range(1, n):
            acc = a[k]
            for i in range(1, k):
                si = out[i]
                if si:
                    sj = out[k - i]
                    if sj:
                        acc -= si * sj
            out.append(acc / two_s0)
        return Jet(out)

    # -- output ------------------------------------------------------------
    def taylor_coefficients(self):
        """Coefficients a_n of sum a_n (z-z0)^n, as floats."""
        return [float(v) for v in self.c]

    def derivatives(self):
        """Derivatives f^(n)(z0) = n! a_n, as floats."""
        fact = 1
        out = []
        for n, v in enumerate(self.c):
            if n > 1:
                fact *= n
            out.append(float(v * fact) if n > 1 else float(v))
        return out


class ZAtoms:
    """The transcendental seeds of the closed-form catalogue at one point.

    Carries jets (possibly of order 0) for z itself, log z, log(2z),
    G1 = Gamma(0,z) e^z, G2 = Gamma(0,2z) e^{2z}, w0 = sqrt(pi) erfc(sqrt(2z))
    e^{2z}, together with 1/z and sqrt(2z).  Every kernel quantity is a
    rational expression in these seeds, so evaluating the expressions on the
    jets yields exact z-derivatives of every kernel quantity.
    """

    __slots__ = ("z0", "order", "prec", "z", "inv_z", "logz", "log2z",
                 "G1", "G2", "w0", "sqrt_2z")

    def __init__(self, z0, order, prec, z, inv_z, logz, log2z, G1, G2, w0,
                 sqrt_2z):
        self.z0 = z0
        self.order = order
        self.prec = prec
        self.z = z
        self.inv_z = inv_z
        self.logz = logz
        self.log2z = log2z
        self.G1 = G1
        self.G2 = G2
        self.w0 = w0
        self.sqrt_2z = sqrt_2z

    def constant(self, value):
        return Jet.constant(value, self.order)


def _integrate_linear_ode(order, f0, slope, rhs):
    """Jet of f with f(z0) = f0 and f' = slope*f + rhs (rhs a jet)."""
    c = [f0]
    for n in range(order):
        # f_{n+1} = (slope*f_n + rhs_n) / (n+1)
        c.append((slope * c[n] + rhs.c[n]) / (n + 1))
    return Jet(c)


def z_atoms(z0: float, order: int, prec: int) -> ZAtoms:
    """Build the seed jets at expansion point ``z0`` with ``prec`` bits."""
    if not z0 > 0:
        raise ValueError("z0 must be positive")
    seed_prec = prec + 16
    g1_0 = specfun.gamma0_scaled(z0, seed_prec)
    g2_0 = specfun.gamma0_scaled(2.0 * z0, seed_prec)
    w0_0 = specfun.erfc_scaled(z0, seed_prec)
    with specfun.working_precision(prec):
        z = Jet.variable(z0, order)
        zv = z.c[0]
        # 1/z and log z have elementary Taylor coefficients
        inv = [gmpy2.mpfr(1) / zv]
        for n in range(order):
            inv.append(-inv[-1] / zv)
        inv_z = Jet(inv)
        lg = [gmpy2.log(zv)]
        for n in range(1, order + 1):
            lg.append(inv_z.c[n - 1] / n)
        logz = Jet(lg)
        log2z = logz + gmpy2.log(gmpy2.mpfr(2))
        # G1' = G1 - 1/z ; G2' = 2 G2 - 1/z ; w0' = 2 w0 - 2/sqrt(2z)
        G1 = _integrate_linear_ode(order, gmpy2.mpfr(g1_0), 1, -inv_z)
        G2 = _integrate_linear_ode(order, gmpy2.mpfr(g2_0), 2, -inv_z)
        sqrt_2z = (z + z).sqrt()
        w0 = _integrate_linear_ode(order, gmpy2.mpfr(w0_0), 2,
                                   -2 / sqrt_2z)
        return ZAtoms(z0, order, prec, z, inv_z, logz, log2z, G1, G2, w0,
                      sqrt_2z)
