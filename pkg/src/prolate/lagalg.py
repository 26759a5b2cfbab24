"""Algebra of truncated associated-Laguerre expansions.

The working basis is the orthonormal family on (0, inf)

    H^mu_k(x) = x^{mu/2} e^{-x/2} sqrt(k!/(k+mu)!) L^mu_k(x),

and an expansion ``H^mu_d(z*x) = sum_k d_k H^mu_k(z*x)`` is represented by its
order ``mu``, argument scale ``z`` and coefficient vector ``d``.  The module
provides the triple-product coefficient tensors (via an exact 8-term
recurrence), products of two expansions with automatic argument rescaling,
re-expansion at a new argument scale, and multiplication by the argument.

Exact rational tensor generation is used whenever the scale parameter is an
int or Fraction; float tensors are generated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np

__all__ = [
    "DEFAULT_K",
    "TAIL_TOL",
    "TruncationError",
    "ExpansionCoeffs",
    "ProductTensor",
    "hylleraas_basis",
    "laguerre_c_coeffs",
    "strip_weights",
    "product_tensor",
    "multiply",
    "rescale",
    "mult_by_x",
    "x_lag_matrix",
    "hylleraas_overlap_matrix",
]

DEFAULT_K = 18      # per-orbital truncation; products roughly double it
TAIL_TOL = 1e-14


class TruncationError(RuntimeError):
    """An expansion's coefficient tail does not decay below tolerance."""


# ---------------------------------------------------------------------------
# basis evaluation
# ---------------------------------------------------------------------------

def hylleraas_basis(mu, K, u):
    """Values H^mu_k(u) for k < K at points u (1D array); shape (len(u), K)."""
    u = np.asarray(u, dtype=float)
    out = np.empty((u.size, K))
    # upward Laguerre recurrence
    lkm1 = np.zeros_like(u)
    lk = np.ones_like(u)
    norm = 1.0 / math.sqrt(math.factorial(mu))
    weight = u ** (mu / 2.0) * np.exp(-u / 2.0)
    for k in range(K):
        out[:, k] = norm * weight * lk
        lkp1 = ((2 * k + mu + 1 - u) * lk - (k + mu) * lkm1) / (k + 1)
        lkm1, lk = lk, lkp1
        norm *= math.sqrt((k + 1) / (k + 1 + mu))
    return out


@dataclass
class ExpansionCoeffs:
    """A truncated expansion H^mu_d(scale * x)."""

    mu: int
    scale: float
    coeffs: np.ndarray

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))

    def __len__(self):
        return len(self.coeffs)

    def __call__(self, x):
        """Evaluate the represented function at x (scalar or array)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = hylleraas_basis(self.mu, len(self.coeffs), self.scale * x) @ self.coeffs
        return vals if vals.size > 1 else float(vals[0])

    def tail_ratio(self):
        peak = np.max(np.abs(self.coeffs))
        if peak == 0:
            return 0.0
        return abs(self.coeffs[-1]) / peak

    def require_tail(self, tol=TAIL_TOL):
        if self.tail_ratio() > tol:
            raise TruncationError(
                f"coefficient tail {self.tail_ratio():.3e} exceeds {tol:.1e}; "
                f"enlarge the truncation (K={len(self)})")
        return self

    def trimmed(self, tol=1e-15):
        """Drop trailing coefficients below tol * max|d|."""
        peak = np.max(np.abs(self.coeffs))
        keep = len(self.coeffs)
        while keep > 1 and abs(self.coeffs[keep - 1]) <= tol * peak:
            keep -= 1
        return ExpansionCoeffs(self.mu, self.scale, self.coeffs[:keep].copy())

    def padded(self, K):
        if K <= len(self.coeffs):
            return self
        out = np.zeros(K)
        out[: len(self.coeffs)] = self.coeffs
        return ExpansionCoeffs(self.mu, self.scale, out)


# ---------------------------------------------------------------------------
# triple-product coefficients c^mu_i(z) and derived tensors
# ---------------------------------------------------------------------------

def _binom_conv(mu, i):
    """binom(mu-1+i, i) with the convention binom(i-1, i) = delta_{0i}."""
    if mu == 0:
        return 1 if i == 0 else 0
    return math.comb(mu - 1 + i, i)


def laguerre_c_coeffs(mu_triple, z, imax):
    """Tensor of c^mu_i(z) = int L^{mu1}_{i1} L^{mu2}_{i2} L^{mu3}_{i3} e^{-zx} dx.

    ``imax`` is an int (cube) or triple of per-axis maxima; the returned array
    has shape imax+1 per axis.  Exact rational arithmetic is used when ``z``
    is an int or Fraction (result dtype object), floats otherwise.
    """
    if isinstance(imax, int):
        imax = (imax, imax, imax)
    n1, n2, n3 = (m + 1 for m in imax)
    mu1, mu2, mu3 = mu_triple
    exact = isinstance(z, (int, Fraction))
    if exact:
        z = Fraction(z)
        if z <= 0:
            raise ValueError("z must be > 0")
        A = -(1 / z - 1)
        B = 2 / z - 1
        C = -(3 / z - 1)
        D = 1 / z
        c = np.zeros((n1, n2, n3), dtype=object)
    else:
        z = float(z)
        if z <= 0:
            raise ValueError("z must be > 0")
        A = -(1.0 / z - 1.0)
        B = 2.0 / z - 1.0
        C = -(3.0 / z - 1.0)
        D = 1.0 / z
        c = np.zeros((n1, n2, n3))

    for i1 in range(n1):
        b1 = _binom_conv(mu1, i1)
        for i2 in range(n2):
            b12 = b1 * _binom_conv(mu2, i2)
            row = c[i1, i2]
            for i3 in range(n3):
                acc = D * (b12 * _binom_conv(mu3, i3)) if b12 else 0
                if i1:
                    acc += A * c[i1 - 1, i2, i3]
                    if i2:
                        acc += B * c[i1 - 1, i2 - 1, i3]
                        if i3:
                            acc += C * c[i1 - 1, i2 - 1, i3 - 1]
                    if i3:
                        acc += B * c[i1 - 1, i2, i3 - 1]
                if i2:
                    acc += A * c[i1, i2 - 1, i3]
                    if i3:
                        acc += B * c[i1, i2 - 1, i3 - 1]
                if i3:
                    acc += A * row[i3 - 1]
                row[i3] = acc
    return c


@lru_cache(maxsize=None)
def strip_weights(mu, i):
    """Integer weights w with x^mu L^mu_i(x) = sum_j w[j] L^0_j(x), j <= i+mu."""
    w = {i: 1}
    for order in range(mu, 0, -1):
        nxt = {}
        for j, coef in w.items():
            nxt[j] = nxt.get(j, 0) + (j + order) * coef
            nxt[j + 1] = nxt.get(j + 1, 0) - (j + 1) * coef
        w = nxt
    out = np.zeros(i + mu + 1, dtype=object)
    for j, coef in w.items():
        out[j] = coef
    return out


@dataclass(frozen=True)
class ProductTensor:
    """Overlap tensor a^mu_{i1 i2 i3} = int H^{mu1}_{i1} H^{mu2}_{i2} H^{mu3}_{i3} dx."""

    mu_triple: tuple
    tensor: np.ndarray  # float64, axes (i1: mu1 side, i2: mu2 side, i3: output)

    def slab(self, k):
        return self.tensor[:, :, k]


def _sqrt_fact_ratio(i, mu):
    """sqrt(i! / (i+mu)!) as float."""
    acc = 1.0
    for j in range(i + 1, i + mu + 1):
        acc *= j
    return 1.0 / math.sqrt(acc)


@lru_cache(maxsize=None)
def _product_tensor_cached(mu1, mu2, sign, i1max, i2max, kmax):
    mu3 = mu1 + sign * mu2
    if mu3 < 0:
        raise ValueError("mu3 = mu1 + sign*mu2 must be >= 0")
    z32 = Fraction(3, 2)
    if sign < 0 or mu2 == 0:
        # strip x^{mu1} off the first factor only
        cten = laguerre_c_coeffs((0, mu2, mu3), z32,
                                 (i1max + mu1, i2max, kmax))
        cten = cten.astype(float)
        w1 = np.zeros((i1max + 1, i1max + mu1 + 1))
        for i in range(i1max + 1):
            w = strip_weights(mu1, i).astype(float)
            w1[i, : len(w)] = w
        raw = np.einsum("ia,ajk->ijk", w1, cten)
    else:
        # strip x^{mu1} and x^{mu2} off the first two factors
        cten = laguerre_c_coeffs((0, 0, mu3), z32,
                                 (i1max + mu1, i2max + mu2, kmax))
        cten = cten.astype(float)
        w1 = np.zeros((i1max + 1, i1max + mu1 + 1))
        for i in range(i1max + 1):
            w = strip_weights(mu1, i).astype(float)
            w1[i, : len(w)] = w
        w2 = np.zeros((i2max + 1, i2max + mu2 + 1))
        for i in range(i2max + 1):
            w = strip_weights(mu2, i).astype(float)
            w2[i, : len(w)] = w
        raw = np.einsum("ia,jb,abk->ijk", w1, w2, cten)
    f1 = np.array([_sqrt_fact_ratio(i, mu1) for i in range(i1max + 1)])
    f2 = np.array([_sqrt_fact_ratio(i, mu2) for i in range(i2max + 1)])
    f3 = np.array([_sqrt_fact_ratio(i, mu3) for i in range(kmax + 1)])
    tensor = raw * f1[:, None, None] * f2[None, :, None] * f3[None, None, :]
    return ProductTensor((mu1, mu2, mu3), tensor)


def product_tensor(mu1, mu2, sign, kmax, i1max=None, i2max=None):
    """Product tensor for H^{mu1} * H^{mu2} -> H^{mu1 + sign*mu2}.

    Requires mu1 >= mu2 >= 0 (callers swap their operands instead).
    """
    if not (mu1 >= mu2 >= 0):
        raise ValueError("require mu1 >= mu2 >= 0")
    if i1max is None:
        i1max = kmax
    if i2max is None:
        i2max = kmax

    def _round8(n):
        return ((n + 8) // 8) * 8

    return _product_tensor_cached(mu1, mu2, int(sign), _round8(i1max),
                                  _round8(i2max), _round8(kmax))


def _raw_tail_ratio(d):
    """Convergence estimate of an untrimmed coefficient vector: the size of
    its last two computed coefficients relative to the peak."""
    peak = np.max(np.abs(d))
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(d[-2:])) / peak)


# ---------------------------------------------------------------------------
# argument rescaling
# ---------------------------------------------------------------------------

def _s_triangular(mu, y, K):
    """Upper-triangular S^mu_y with H^mu_d(y x) = y^{mu/2} e^{-(y-1)x/2} H^mu_{S d}(x)."""
    S = np.zeros((K, K))
    for k in range(K):
        # s_{ik} = sqrt(k!(i+mu)!/(i!(k+mu)!)) y^k (1/y-1)^{k-i} binom(k+mu, i+mu)
        for i in range(k + 1):
            ratio = Fraction(math.factorial(k) * math.factorial(i + mu),
                             math.factorial(i) * math.factorial(k + mu))
            S[i, k] = (math.sqrt(float(ratio)) * y ** k
                       * (1.0 / y - 1.0) ** (k - i) * math.comb(k + mu, i + mu))
    return S


def hylleraas_overlap_matrix(mu, y, n_rows, n_cols, prec=None):
    """M[i, k] = int_0^inf H^mu_i(x) H^mu_k(y x) dx via the terminating 2F1 sum.

    The alternating hypergeometric sum loses digits roughly like
    (2 min(i,k) + mu) * log(1+w) with w = 4y/(y-1)^2, so it is evaluated in
    MPFR at a precision scaled to the requested block.
    """
    if y <= 0:
        raise ValueError("y must be > 0")
    if abs(y - 1.0) < 1e-14:
        M = np.zeros((n_rows, n_cols))
        np.fill_diagonal(M, 1.0)
        return M
    w = 4.0 * y / (y - 1.0) ** 2
    kbig = max(n_rows, n_cols)
    if prec is None:
        prec = 96 + int(1.5 * kbig * math.log2(1.0 + w) / 2 + 0.1 * kbig)
    M = np.zeros((n_rows, n_cols))
    with gmpy2.context(precision=int(prec)):
        yy = gmpy2.mpfr(y)
        r = (yy - 1) / (yy + 1)
        wm = -4 * yy / (yy - 1) ** 2
        base = 2 / (yy + 1) * (2 * gmpy2.sqrt(yy) / (yy + 1)) ** mu
        # binomial square roots
        broot = [gmpy2.sqrt(gmpy2.mpfr(math.comb(n + mu, mu)))
                 for n in range(kbig)]
        rpow = [gmpy2.mpfr(1)]
        for _ in range(n_rows + n_cols):
            rpow.append(rpow[-1] * r)
        for i in range(n_rows):
            for k in range(n_cols):
                # 2F1(-i, -k; 1+mu; wm), terminating
                term = gmpy2.mpfr(1)
                acc = gmpy2.mpfr(1)
                for n in range(min(i, k)):
                    term *= (gmpy2.mpq((i - n) * (k - n), (mu + 1 + n) * (n + 1))
                             * wm)
                    acc += term
                sign = -1 if k % 2 else 1
                M[i, k] = float(base * broot[i] * broot[k] * sign
                                * rpow[i + k] * acc)
    return M


def rescale(e: ExpansionCoeffs, new_scale, K_out=None, tail_tol=1e-10):
    """Re-express the same function at a new argument scale."""
    if not new_scale > 0:
        raise ValueError("new_scale must be > 0")
    y = e.scale / new_scale
    if abs(y - 1.0) < 1e-15:
        return ExpansionCoeffs(e.mu, new_scale, e.coeffs.copy())
    r = abs(y - 1.0) / (y + 1.0)
    if K_out is None:
        grow = int(math.ceil(math.log(1e-18) / math.log(r))) if r > 0 else 8
        K_out = len(e) + min(max(grow, 8), 120)
    M = hylleraas_overlap_matrix(e.mu, y, K_out, len(e))
    d = M @ e.coeffs
    raw_tail = _raw_tail_ratio(d)
    if raw_tail > tail_tol:
        raise TruncationError(
            f"rescale tail {raw_tail:.2e} exceeds {tail_tol:.1e} "
            f"(y={y:.4f}, K_out={K_out})")
    return ExpansionCoeffs(e.mu, new_scale, d).trimmed()


# ---------------------------------------------------------------------------
# products and argument multiplication
# ---------------------------------------------------------------------------

def multiply(e1: ExpansionCoeffs, e2: ExpansionCoeffs, m1, m2, K_out=None,
             tail_tol=1e-10):
    """Product H^{|m1|}_{d1}(z1 x) * H^{|m2|}_{d2}(z2 x) = H^{|m1-m2|}_d(z x).

    The output scale is z = (z1+z2)/2, which matches the exponential factors
    on both sides exactly.  Beyond the combined polynomial content
    (len(e1)+len(e2) terms) the coefficient tail decays at least
    geometrically with ratio 1/3, so the default output length adds a
    fixed margin covering that floor down to machine precision.
    """
    if e1.mu != abs(m1) or e2.mu != abs(m2):
        raise ValueError("expansion orders must equal |m1|, |m2|")
    if e1.mu < e2.mu:
        e1, e2, m1, m2 = e2, e1, m2, m1
    mu1, mu2 = e1.mu, e2.mu
    mu3 = abs(m1 - m2)
    if mu3 == mu1 - mu2:
        sign = -1
    elif mu3 == mu1 + mu2:
        sign = +1
    else:  # pragma: no cover - unreachable for integer m
        raise ValueError("inconsistent m labels")
    z = (e1.scale + e2.scale) / 2.0
    if K_out is None:
        K_out = len(e1) + len(e2) + 44
    if abs(e1.scale - e2.scale) < 1e-14 * z:
        a1, a2 = e1.coeffs, e2.coeffs
        pref = 1.0
    else:
        y1 = e1.scale / z
        y2 = e2.scale / z
        a1 = _s_triangular(mu1, y1, len(e1)) @ e1.coeffs
        a2 = _s_triangular(mu2, y2, len(e2)) @ e2.coeffs
        pref = y1 ** (mu1 / 2.0) * y2 ** (mu2 / 2.0)
    T = product_tensor(mu1, mu2, sign, K_out - 1,
                       i1max=len(a1) - 1, i2max=len(a2) - 1)
    d = pref * np.einsum("i,j,ijk->k", a1, a2,
                         T.tensor[: len(a1), : len(a2), :K_out])
    raw_tail = _raw_tail_ratio(d)
    if raw_tail > tail_tol:
        raise TruncationError(
            f"product tail {raw_tail:.2e} exceeds {tail_tol:.1e} "
            f"(K_out={K_out})")
    return ExpansionCoeffs(mu3, z, d).trimmed()


def x_lag_matrix(mu, K):
    """Tridiagonal matrix of multiplication by x in the H^mu basis (K+1 x K)."""
    X = np.zeros((K + 1, K))
    for k in range(K):
        X[k, k] = 2 * k + mu + 1
        if k + 1 < K:
            X[k, k + 1] = -math.sqrt((k + 1) * (k + 1 + mu))
        X[k + 1, k] = -math.sqrt((k + 1) * (k + 1 + mu))
    return X


def mult_by_x(e: ExpansionCoeffs):
    """Multiply by the internal argument: x * H^mu_d(x) with x = scale * (input)."""
    X = x_lag_matrix(e.mu, len(e))
    return ExpansionCoeffs(e.mu, e.scale, X @ e.coeffs)
