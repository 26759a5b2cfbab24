"""Fast per-column engines behind the radial kernel assembly.

Everything in this module works at a fixed argument ``z`` (one "column" of
the kernel tables) and produces weighted Laguerre integral families in bulk:

* seed sequences -- forward three-term recurrences for the integral families

    ``IV1[m] = int_0^oo L_m(x) e^{-x}   / (x+2z) dx``
    ``IV2[m] = int_0^oo L_m(x) e^{-x/2} / (x+2z) dx``
    ``w[m]   = int_0^oo L_m(x) e^{-x}   / sqrt(2z+x) dx``
    ``A0[m]  = int_0^oo L_m(x) e^{-x}   log(1 + 2z/x) dx``
    ``A2[m]  = int_0^oo L_m(x) e^{-x/2} arcoth(1 + x/z) dx``

  all carried out in truncated-Taylor (jet) arithmetic so that z-derivatives
  up to a requested order come along for free.

* the anti-diagonal ladder -- for any weight ``lam(x)`` the moment matrix
  ``Om[l,m] = int_0^oo L_l(x) L_m(x) e^{-x} lam(x) dx`` satisfies the exact
  two-dimensional recurrence (a consequence of x L_l being expressible in
  L_{l-1}, L_l, L_{l+1} applied symmetrically to both factors)

      (l+1) Om[l+1,m] = 2(l-m) Om[l,m] - l Om[l-1,m]
                        + (m+1) Om[l,m+1] + m Om[l,m-1]

  which fills a whole (depth x depth) block from the single seed row
  ``Om[0,m]``.  The fill amplifies rounding errors of the seed row roughly
  like 4**depth, which is paid for with extra working precision.

* block-floating-point (BFP) matrices -- exact fixed-point matrix products
  through numpy.  Values are split into balanced 16-bit limbs stored as
  float64; limb-pair products then stay below 2**53 for the contraction
  lengths used here, so ordinary BLAS matmuls accumulate them exactly.
  This is what makes the large, cancellation-heavy sandwich products
  affordable without a C extension.
"""

from __future__ import annotations

import math

import gmpy2
import numpy as np

from .jets import Jet, ZAtoms

__all__ = [
    "seed_iv1",
    "seed_iv2",
    "seed_wv",
    "a0_from_iv1",
    "a2_from_iv2",
    "ladder_fill",
    "BFP",
    "LIMB_BITS",
    "LIMB_BASE",
    "ladder_precision",
    "seed_precision",
    "sigma_column_count",
]

# ---------------------------------------------------------------------------
# Seed sequences (jet arithmetic)
# ---------------------------------------------------------------------------


def _euler_gamma(prec):
    with gmpy2.context(gmpy2.get_context(), precision=prec + 8):
        return gmpy2.const_euler()


def seed_iv1(at: ZAtoms, count: int) -> list:
    """IV1[m] = int L_m(x) e^{-x}/(x+2z) dx for m < count, as jets.

    Three-term forward recurrence; the inhomogeneity is the plain moment
    int L_m e^{-x} dx = delta_{m0}.
    """
    out = [at.G2]
    if count == 1:
        return out
    two_z = at.z + at.z
    prev, cur = None, at.G2
    for m in range(count - 1):
        nxt = (2 * m + 1) * cur + two_z * cur
        if m > 0:
            nxt = nxt - m * prev
        if m == 0:
            nxt = nxt - at.constant(1)
        nxt = nxt * gmpy2.mpq(1, m + 1)
        out.append(nxt)
        prev, cur = cur, nxt
    return out


def seed_iv2(at: ZAtoms, count: int) -> list:
    """IV2[m] = int L_m(x) e^{-x/2}/(x+2z) dx; inhomogeneity 2(-1)^m."""
    out = [at.G1]
    if count == 1:
        return out
    two_z = at.z + at.z
    prev, cur = None, at.G1
    for m in range(count - 1):
        nxt = (2 * m + 1) * cur + two_z * cur
        if m > 0:
            nxt = nxt - m * prev
        nxt = nxt - at.constant(2 * (-1) ** m)
        nxt = nxt * gmpy2.mpq(1, m + 1)
        out.append(nxt)
        prev, cur = cur, nxt
    return out


def seed_wv(at: ZAtoms, count: int):
    """w[m] = int L_m e^{-x} (2z+x)^{-1/2} dx and v[m] = int L_m e^{-x} (2z+x)^{1/2} dx.

    Coupled forward recurrences: the w-step needs v as inhomogeneity, and v
    follows from integration by parts (d/dx L_m = -sum_{j<m} L_j).
    """
    w = [at.w0]
    half = gmpy2.mpq(1, 2)
    v0 = at.w0 * half + at.sqrt_2z
    v = [v0]
    if count == 1:
        return w, v
    two_z = at.z + at.z
    vsum = at.constant(0)  # sum of v[j] for j < m
    prev, cur = None, at.w0
    for m in range(count - 1):
        nxt = (2 * m + 1) * cur + two_z * cur
        if m > 0:
            nxt = nxt - m * prev
        nxt = nxt - v[m]
        nxt = nxt * gmpy2.mpq(1, m + 1)
        w.append(nxt)
        vsum = vsum + v[m]
        v.append(nxt * half + at.sqrt_2z - vsum)
        prev, cur = cur, nxt
    return w, v


def a0_from_iv1(at: ZAtoms, iv1: list) -> list:
    """A0[m] = int L_m(x) e^{-x} log(1 + 2z/x) dx from the IV1 sequence.

    Integration by parts against the exact antiderivative of L_m e^{-x}
    collapses the log weight onto IV1 differences plus the moment 1/m.
    """
    prec = at.prec
    gamma = _euler_gamma(prec)
    out = [iv1[0] + (at.log2z + gamma)]
    for m in range(1, len(iv1)):
        out.append(iv1[m] - iv1[m - 1] + at.constant(gmpy2.mpq(1, m)))
    return out


def a2_from_iv2(at: ZAtoms, iv2: list) -> list:
    """A2[m] = int L_m(x) e^{-x/2} arcoth(1 + x/z) dx from the IV2 sequence.

    Uses arcoth(1+x/z) = (1/2) log(1 + 2z/x) and the substitution x -> 2x,
    which turns the two log pieces into IV2 combinations plus the exactly
    known integrals of log(x/z) against L_m(2x) e^{-x}.
    """
    prec = at.prec
    gamma = _euler_gamma(prec)
    gamma_logz = at.logz + gamma
    out = []
    r_prev = at.constant(0)  # alternating partial sum of IV2
    s = gmpy2.mpq(0)  # sum_i binom(m,i) (-2)^i H_i, exact rational
    for m, cur in enumerate(iv2):
        if m > 0:
            s = -s + gmpy2.mpq((-1) ** m - 1, m)
        lo2 = at.constant(s) - ((-1) ** m) * gamma_logz
        out.append(cur - 2 * r_prev - lo2)
        r_prev = cur - r_prev
    return out


# ---------------------------------------------------------------------------
# Anti-diagonal ladder
# ---------------------------------------------------------------------------


def ladder_fill(seed_row, order, depth, keep, consume):
    """Fill the moment-matrix ladder from its seed row.

    ``seed_row`` is row 0 as a flat list of mpfr coefficients, entry m
    occupying slots [m*(order+1), (m+1)*(order+1)).  Rows l = 0..depth-1 are
    produced in turn; each is passed to ``consume(l, flat_row, width)`` with
    ``width = min(len(seed)-l, keep)`` valid entries (the fill loses one
    column per row).  Entries are plain mpfr lists rather than Jet objects
    to keep the inner loop overhead low; the recurrence has integer
    coefficients, so jet components never mix.
    """
    n_ord = order + 1
    total = len(seed_row) // n_ord
    if depth > total:
        raise ValueError("ladder depth exceeds seed row length")
    cur = list(seed_row)
    prev = None
    consume(0, cur, min(total, keep))
    for l in range(depth - 1):
        m_count = total - l - 1
        nxt = [None] * (m_count * n_ord)
        inv = gmpy2.mpq(1, l + 1)
        for m in range(m_count):
            base = m * n_ord
            c0 = 2 * (l - m)
            for n in range(n_ord):
                i = base + n
                acc = gmpy2.mpfr(0)
                if c0:
                    acc = c0 * cur[i]
                if l > 0:
                    acc = acc - l * prev[i]
                acc = acc + (m + 1) * cur[i + n_ord]
                if m > 0:
                    acc = acc + m * cur[i - n_ord]
                nxt[i] = acc * inv
        prev, cur = cur, nxt
        consume(l + 1, cur, min(m_count, keep))


# ---------------------------------------------------------------------------
# Precision policies
# ---------------------------------------------------------------------------


def ladder_precision(depth: int, seed_len: int, z: float, out_bits: int,
                     width: int | None = None) -> int:
    """Working precision for a ladder fill whose output must be good to
    ``out_bits`` fractional bits.

    Measured loss law: a (depth x width) fill amplifies seed noise by about
    ``2 min(depth, width) + 1.6 sqrt(depth width)`` bits (the entries are
    integer-coefficient combinations of the seeds whose coefficient l1-norm
    grows at that rate), while the forward seed recurrences themselves lose
    roughly ``4.1 sqrt(z seed_len)`` bits at the far end of the row.
    """
    if width is None:
        width = depth
    a = min(depth, width)
    amp = (2.0 * a + 1.6 * math.sqrt(depth * width)
           + 4.1 * math.sqrt(max(z, 0.25) * seed_len))
    return int(out_bits + amp) + 96


def seed_precision(seed_len: int, z: float, out_bits: int) -> int:
    inst = 4.1 * math.sqrt(max(z, 0.25) * seed_len)
    return int(out_bits + inst) + 96


def sigma_column_count(n_rows: int, z: float, rel_bits: int) -> int:
    """Number of expansion columns needed so rows a < n_rows of the
    (2z+x)^{-1/2} Laguerre expansion have tails below 2**-rel_bits relative
    to their leading entries.  Tail decay follows exp(-2 sqrt(2 z k))."""
    target = rel_bits * math.log(2.0)
    root = math.sqrt(max(n_rows, 1))
    k = (root + (target + 8.0) / (2.0 * math.sqrt(2.0 * z))) ** 2
    k += 2.0 * math.log(k + 2.0)
    return max(int(k) + 4, n_rows + 8)


# ---------------------------------------------------------------------------
# Block-floating-point matrices
# ---------------------------------------------------------------------------

LIMB_BITS = 16
LIMB_BASE = float(1 << LIMB_BITS)
_LIMB_HALF = 1 << (LIMB_BITS - 1)


class BFP:
    """Jet-valued matrix in exact block-floating-point representation.

    ``value[n, r, c] = 2**exp2 * sum_l limbs[n, r, c, l] * 2**(16*l)``

    with balanced limbs |limbs| <= 2**15 stored as float64.  All arithmetic
    performed here (matmul, add, scale by small integers) is exact while the
    limb magnitudes stay far enough below 2**53; products renormalize their
    limbs afterwards.  ``exp2`` is kept a multiple of 16 so operands align.
    """

    __slots__ = ("limbs", "exp2")

    def __init__(self, limbs: np.ndarray, exp2: int):
        if exp2 % LIMB_BITS:
            raise ValueError("exp2 must be a multiple of the limb width")
        self.limbs = limbs
        self.exp2 = exp2

    # -- construction -----------------------------------------------------

    @staticmethod
    def zeros(n_ord: int, rows: int, cols: int, n_limbs: int, exp2: int) -> "BFP":
        return BFP(np.zeros((n_ord, rows, cols, n_limbs)), exp2)

    @staticmethod
    def from_int_array(ints, n_ord: int, rows: int, cols: int, exp2: int) -> "BFP":
        """Exact conversion from an iterable of python ints laid out as
        [n][r][c] (flattened); limb count adapts to the largest magnitude."""
        flat = list(ints)
        if len(flat) != n_ord * rows * cols:
            raise ValueError("length mismatch")
        widest = max((abs(v) for v in flat), default=0)
        n_bytes = max((widest.bit_length() + 16) // 8 + 1, 2)
        if n_bytes % 2:
            n_bytes += 1
        buf = b"".join(v.to_bytes(n_bytes, "little", signed=True) for v in flat)
        raw = np.frombuffer(buf, dtype="<u2").astype(np.float64)
        raw = raw.reshape(n_ord, rows, cols, n_bytes // 2)
        # two's complement: value = sum u_l 2^(16 l) - (negative ? 2^(16 L) : 0);
        # balanced recoding absorbs the sign term through the carry chain.
        limbs = np.empty_like(raw)
        carry = np.zeros(raw.shape[:-1])
        for l in range(raw.shape[-1]):
            u = raw[..., l] + carry
            carry = np.floor((u + _LIMB_HALF) / LIMB_BASE)
            limbs[..., l] = u - carry * LIMB_BASE
        return BFP(limbs, exp2)._trimmed()

    @staticmethod
    def from_float(arr: np.ndarray, frac_bits: int) -> "BFP":
        """Quantize a float64 jet array [n, r, c] at 2**-frac_bits (testing aid)."""
        f = int(math.ceil(frac_bits / LIMB_BITS)) * LIMB_BITS
        scaled = np.asarray(arr, dtype=np.float64) * math.pow(2.0, f)
        n_limbs = max(2, int(np.ceil((np.log2(np.abs(scaled).max() + 1) + 2) / LIMB_BITS)) + 1)
        limbs = np.zeros(scaled.shape + (n_limbs,))
        rem = np.rint(scaled)
        for l in range(n_limbs):
            q = np.floor((rem + _LIMB_HALF) / LIMB_BASE)
            limbs[..., l] = rem - q * LIMB_BASE
            rem = q
        return BFP(limbs, -f)

    # -- inspection --------------------------------------------------------

    @property
    def shape(self):
        return self.limbs.shape[:3]

    def approx(self) -> np.ndarray:
        """float64 approximation of the held values (top limbs dominate)."""
        weights = np.power(2.0, self.exp2 + LIMB_BITS * np.arange(self.limbs.shape[-1]))
        return self.limbs @ weights

    def to_ints(self):
        """Exact python-int reconstruction, returned with the scale exponent."""
        n, r, c, L = self.limbs.shape
        flat = self.limbs.reshape(-1, L)
        out = []
        for row in flat:
            acc = 0
            for l in range(L - 1, -1, -1):
                acc = (acc << LIMB_BITS) + int(row[l])
            out.append(acc)
        return out, self.exp2

    # -- arithmetic --------------------------------------------------------

    def _trimmed(self) -> "BFP":
        limbs = self.limbs
        while limbs.shape[-1] > 1 and not limbs[..., -1].any():
            limbs = limbs[..., :-1]
        drop = 0
        while drop < limbs.shape[-1] - 1 and not limbs[..., drop].any():
            drop += 1
        if drop:
            limbs = limbs[..., drop:]
        return BFP(np.ascontiguousarray(limbs), self.exp2 + LIMB_BITS * drop)

    def _renormalized(self) -> "BFP":
        limbs = self.limbs
        spare = int(np.ceil(np.log2(np.abs(limbs[..., -1]).max() + 2) / LIMB_BITS)) + 1
        limbs = np.concatenate([limbs, np.zeros(limbs.shape[:-1] + (spare,))], axis=-1)
        carry = np.zeros(limbs.shape[:-1])
        for l in range(limbs.shape[-1]):
            u = limbs[..., l] + carry
            carry = np.floor((u + _LIMB_HALF) / LIMB_BASE)
            limbs[..., l] = u - carry * LIMB_BASE
        if carry.any():
            raise ArithmeticError("limb overflow during renormalization")
        return BFP(limbs, self.exp2)._trimmed()

    def truncated(self, frac_bits: int) -> "BFP":
        """Drop low limbs below roughly 2**-frac_bits absolute resolution."""
        floor_exp = -int(math.ceil(frac_bits / LIMB_BITS)) * LIMB_BITS
        drop = (floor_exp - self.exp2) // LIMB_BITS
        if drop <= 0:
            return self
        drop = min(drop, self.limbs.shape[-1] - 1)
        return BFP(
            np.ascontiguousarray(self.limbs[..., drop:]),
            self.exp2 + LIMB_BITS * drop,
        )

    def _aligned_pair(self, other: "BFP"):
        exp2 = min(self.exp2, other.exp2)
        a, b = self.limbs, other.limbs
        pad_a = (self.exp2 - exp2) // LIMB_BITS
        pad_b = (other.exp2 - exp2) // LIMB_BITS
        L = max(a.shape[-1] + pad_a, b.shape[-1] + pad_b)
        out_a = np.zeros(a.shape[:-1] + (L,))
        out_b = np.zeros(b.shape[:-1] + (L,))
        out_a[..., pad_a : pad_a + a.shape[-1]] = a
        out_b[..., pad_b : pad_b + b.shape[-1]] = b
        return out_a, out_b, exp2

    def __add__(self, other: "BFP") -> "BFP":
        a, b, exp2 = self._aligned_pair(other)
        return BFP(a + b, exp2)._renormalized()

    def __sub__(self, other: "BFP") -> "BFP":
        a, b, exp2 = self._aligned_pair(other)
        return BFP(a - b, exp2)._renormalized()

    def scaled_int(self, factor: int) -> "BFP":
        """Exact multiplication by a small integer."""
        if abs(factor) > 1 << 24:
            raise ValueError("factor too large for single-pass scaling")
        return BFP(self.limbs * float(factor), self.exp2)._renormalized()

    def transpose(self) -> "BFP":
        return BFP(np.ascontiguousarray(self.limbs.transpose(0, 2, 1, 3)), self.exp2)

    def matmul(self, other: "BFP", n_ord: int | None = None) -> "BFP":
        """Exact jet matrix product (Cauchy product over the jet axis)."""
        na, ra, ka, la = self.limbs.shape
        nb, kb, cb, lb = other.limbs.shape
        if ka != kb:
            raise ValueError("inner dimensions differ")
        if n_ord is None:
            n_ord = min(na + nb - 1, max(na, nb))
        lo = la + lb - 1
        out = np.zeros((n_ord, ra, cb, lo + 1))
        # limb-major layout so each (p, q) jet pair is one broadcast matmul
        a = np.ascontiguousarray(self.limbs.transpose(0, 3, 1, 2))
        b = np.ascontiguousarray(other.limbs.transpose(0, 3, 1, 2))
        for p in range(min(na, n_ord)):
            q_hi = min(nb, n_ord - p)
            for q in range(q_hi):
                prod = np.matmul(a[p][:, None], b[q][None, :])
                acc = out[p + q]
                for l1 in range(la):
                    acc[..., l1 : l1 + lb] += prod[l1].transpose(1, 2, 0)
        return BFP(out, self.exp2 + other.exp2)._renormalized()


def mpfr_rows_to_ints(flat_row, frac_bits: int):
    """Scale a flat list of mpfr by 2**frac_bits and truncate to ints."""
    out = []
    for v in flat_row:
        out.append(int(gmpy2.mpz(gmpy2.mul_2exp(v, frac_bits))))
    return out
