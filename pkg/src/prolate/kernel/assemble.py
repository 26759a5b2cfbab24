"""Quadrature-free assembly of the two-electron radial kernel matrices.

``B^nu_tau(z)`` is the symmetric matrix of nested two-sided radial integrals

    b[k, kt] = N * (M[k, kt] + M[kt, k]),      N = (tau-nu)!/(tau+nu)!
    M[k, kt] = int_0^oo H^nu_kt(xt) Q^nu_tau(1 + xt/z)
                  int_0^xt H^nu_k(x) P^nu_tau(1 + x/z) dx dxt

with ``H^nu_k(x) = sqrt(k!/(k+nu)!) x^{nu/2} e^{-x/2} L^nu_k(x)`` and P, Q
the associated Legendre functions of the first and second kind.  These are
the universal radial factors of two-electron repulsion integrals over
prolate spheroidal orbitals; everything molecule-specific enters only
through the column variable z.

Evaluation strategy (no numerical quadrature anywhere):

* ``Q^nu_tau(xi) = G^nu_tau(xi)/(xi^2-1)^{nu/2} + P^nu_tau(xi) arcoth(xi)``
  splits M into an arcoth part and a polynomial (G) part.  The polynomial
  factors are absorbed exactly into shifted Laguerre indices (banded jet
  matrices), leaving universal nested integral families: the arcoth moment
  matrix (filled by the anti-diagonal ladder of :mod:`ladders`), the
  triangular exponential-moment matrix t, and, for nu = 2, 1/(2z+x)-weighted
  companions.
* For nu = 1 a factor (2z+x)^{-1/2} survives on both sides; it is expanded
  over an auxiliary Laguerre block whose length adapts to the accuracy
  target, with expansion coefficients from the stable w-sequence ladder.
* The arcoth and G parts cancel to many digits (tens of digits, growing
  with tau and shrinking with z).  The cancellation is estimated up front
  from absorb-row norms, every contraction runs in exact block-floating-
  point limb arithmetic with that many guard bits, and the achieved margin
  is measured afterwards; a failed margin restarts the column wider.
* Every scalar is an order-``n`` jet in z, so a single assembly yields the
  Taylor coefficients of B about the column point along with its value.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction

import gmpy2
import numpy as np

from .. import specfun
from . import ladders
from .jets import Jet, z_atoms
from .ladders import BFP

__all__ = ["assemble_B", "assemble_column", "ColumnDiagnostics"]

_GUARD_BITS = 30          # headroom between estimated cancellation and limb budget
_MARGIN_BITS = 58         # required surviving bits after measured cancellation
_TAIL_GUARD = 14          # extra bits on the sqrt-expansion tail target
_MAX_ATTEMPTS = 3


class ColumnDiagnostics(dict):
    """Assembly metadata: limb budget, block sizes, measured margins, timings."""


# ---------------------------------------------------------------------------
# Exact polynomial plumbing
# ---------------------------------------------------------------------------


def _binomial_transform(xi_coeffs):
    """Coefficients F_n with q(1 + x/z) = sum_n F_n (x/z)^n, given the
    ascending xi-coefficients of q: F_n = sum_{d>=n} q_d C(d, n)."""
    deg = len(xi_coeffs) - 1
    return [
        sum(Fraction(xi_coeffs[d]) * math.comb(d, n) for d in range(n, deg + 1))
        for n in range(deg + 1)
    ]


def _inv_z_powers(at, n):
    pows = [at.constant(1)]
    for _ in range(max(n, 0)):
        pows.append(pows[-1] * at.inv_z)
    return pows


def _poly_p(at, tau):
    """Jet x-coefficients of P_tau(1 + x/z)."""
    F = _binomial_transform(specfun.legendre_p_coeffs(tau, 0))
    zp = _inv_z_powers(at, len(F) - 1)
    return [zp[n] * F[n] for n in range(len(F))]


def _poly_g0(at, tau):
    """Jet x-coefficients of G^0_tau(1 + x/z); empty for tau = 0."""
    g = specfun.legendre_g_coeffs(tau, 0)
    if not g:
        return []
    F = _binomial_transform(g)
    zp = _inv_z_powers(at, len(F) - 1)
    return [zp[n] * F[n] for n in range(len(F))]


def _poly_pi1(at, tau):
    """pi(x) = x (2z+x) P'_tau(1+x/z) / z, degree tau + 1."""
    F = _binomial_transform(specfun.legendre_p_coeffs(tau, 1))
    zp = _inv_z_powers(at, len(F))
    out = [at.constant(0) for _ in range(tau + 2)]
    for n, fn in enumerate(F):
        out[n + 1] = out[n + 1] + zp[n] * (2 * fn)
        term = zp[n + 1] * fn
        if n + 2 < len(out):
            out[n + 2] = out[n + 2] + term
        else:
            out.append(term)
    return out


def _poly_zg1(at, tau):
    """z * G^1_tau(1 + x/z), degree tau."""
    g = specfun.legendre_g_coeffs(tau, 1)
    if not g:
        return []
    F = _binomial_transform(g)
    zp = _inv_z_powers(at, len(F) - 2)
    out = []
    for n, fn in enumerate(F):
        out.append(at.z * fn if n == 0 else zp[n - 1] * fn)
    return out


def _poly_pi2(at, tau):
    """pi2(x) = x^2 (x+2z) P''_tau(1+x/z) / z^2, degree tau + 1."""
    F = _binomial_transform(specfun.legendre_p_coeffs(tau, 2))
    zp = _inv_z_powers(at, len(F) + 1)
    out = [at.constant(0) for _ in range(tau + 2)]
    for n, fn in enumerate(F):
        out[n + 2] = out[n + 2] + zp[n + 1] * (2 * fn)
        term = zp[n + 2] * fn
        if n + 3 < len(out):
            out[n + 3] = out[n + 3] + term
        else:
            out.append(term)
    return out


def _poly_g2_quotient(at, tau):
    """Synthetic division z^2 G^2_tau(1+s/z) = (s+2z) PW(s) + rho.

    Returns (PW jet x-coefficients, rho jet)."""
    F = _binomial_transform(specfun.legendre_g_coeffs(tau, 2))
    zp = _inv_z_powers(at, len(F) - 3)
    a = []
    for n, fn in enumerate(F):
        if n == 0:
            a.append(at.z * at.z * fn)
        elif n == 1:
            a.append(at.z * fn)
        else:
            a.append(zp[n - 2] * fn)
    d = len(a) - 1
    two_z = at.z + at.z
    b = [None] * d
    b[d - 1] = a[d]
    for i in range(d - 1, 0, -1):
        b[i - 1] = a[i] - two_z * b[i]
    rho = a[0] - two_z * b[0]
    return b, rho


def _absorb_rows(x_jets, mu, n_rows, n_cols, at):
    """Banded absorb matrix: row k holds the L^mu expansion coefficients of
    poly(x) * L^mu_k(x), where poly has the given jet x-coefficients.

    Returns nested lists rows[k][a] = jet coefficient list."""
    order = at.order
    zero = [gmpy2.mpfr(0)] * (order + 1)
    deg = len(x_jets) - 1
    rows = []
    for k in range(n_rows):
        acc = [None] * n_cols
        vec = {k: at.constant(1)}  # X^n applied to e_k
        for n, cn in enumerate(x_jets):
            if cn is not None and any(cn.c):
                for idx, val in vec.items():
                    if idx < n_cols:
                        term = val * cn
                        acc[idx] = term if acc[idx] is None else acc[idx] + term
            if n < deg:
                nxt = {}
                for idx, val in vec.items():
                    # x L^mu_a = -(a+1) L_{a+1} + (2a+mu+1) L_a - (a+mu) L_{a-1}
                    nxt[idx + 1] = nxt.get(idx + 1, 0) + val * (-(idx + 1))
                    nxt[idx] = nxt.get(idx, 0) + val * (2 * idx + mu + 1)
                    if idx > 0:
                        nxt[idx - 1] = nxt.get(idx - 1, 0) + val * (-(idx + mu))
                vec = nxt
        rows.append([list(zero) if v is None else v.c for v in acc])
    return rows


def _absorb_norm_bits(x_float, mu, probe_row):
    """log2 of the absorb-row 1-norm at the deepest row (float64 probe)."""
    deg = len(x_float) - 1
    vec = {probe_row: 1.0}
    acc = {}
    for n, cn in enumerate(x_float):
        if cn:
            for idx, val in vec.items():
                acc[idx] = acc.get(idx, 0.0) + val * cn
        if n < deg:
            nxt = {}
            for idx, val in vec.items():
                nxt[idx + 1] = nxt.get(idx + 1, 0.0) - (idx + 1) * val
                nxt[idx] = nxt.get(idx, 0.0) + (2 * idx + mu + 1) * val
                if idx > 0:
                    nxt[idx - 1] = nxt.get(idx - 1, 0.0) - (idx + mu) * val
            vec = nxt
    norm = sum(abs(v) for v in acc.values())
    return math.log2(max(norm, 1.0))


# ---------------------------------------------------------------------------
# BFP helpers
# ---------------------------------------------------------------------------


def _jet_rows_to_bfp(rows, frac_bits, n_ord):
    """rows[r][c] = jet coefficient list -> exact BFP [n][r][c]."""
    R = len(rows)
    C = len(rows[0]) if R else 0
    ints = []
    for n in range(n_ord):
        for r in range(R):
            row = rows[r]
            for c in range(C):
                ints.append(int(gmpy2.mpz(gmpy2.mul_2exp(row[c][n], frac_bits))))
    return BFP.from_int_array(ints, n_ord, R, C, -frac_bits)


def _bfp_to_jets(bfp, prec):
    """Exact BFP -> nested lists out[r][c] = mpfr jet coefficient list."""
    ints, exp2 = bfp.to_ints()
    n, R, C, _ = bfp.limbs.shape
    out = [[[None] * n for _ in range(C)] for _ in range(R)]
    with specfun.working_precision(prec):
        idx = 0
        for nn in range(n):
            for r in range(R):
                for c in range(C):
                    v = gmpy2.mpfr(ints[idx])
                    idx += 1
                    if exp2 >= 0:
                        v = gmpy2.mul_2exp(v, exp2)
                    else:
                        v = gmpy2.div_2exp(v, -exp2)
                    out[r][c][nn] = v
    return out


def _bfp_log2max(bfp):
    """log2 of the largest entry magnitude (limb-resolution estimate)."""
    limbs = bfp.limbs
    best = -math.inf
    for l in range(limbs.shape[-1]):
        m = float(np.abs(limbs[..., l]).max())
        if m > 0.0:
            best = max(best, math.log2(m) + ladders.LIMB_BITS * l)
    return best + bfp.exp2 if best > -math.inf else -math.inf


def _alt_suffix(values):
    """suffix[j] = sum_{c > j} (-1)^c values[c], coefficient-wise."""
    n = len(values)
    n_ord = len(values[0])
    out = [None] * n
    acc = [gmpy2.mpfr(0)] * n_ord
    for j in range(n - 1, -1, -1):
        out[j] = acc
        sign = 1 if j % 2 == 0 else -1
        acc = [a + sign * v for a, v in zip(acc, values[j])]
    return out


def _ell_pattern(block_rows):
    """Along the first index: out[a] = row[a] - 2 T[a-1], T[a] = row[a] - T[a-1].

    ``block_rows`` is a list of rows of jet coefficient lists."""
    size = len(block_rows)
    if size == 0:
        return []
    n_cols = len(block_rows[0])
    n_ord = len(block_rows[0][0])
    out = [[None] * n_cols for _ in range(size)]
    for c in range(n_cols):
        t_prev = [gmpy2.mpfr(0)] * n_ord
        for a in range(size):
            cur = block_rows[a][c]
            out[a][c] = [cv - 2 * tv for cv, tv in zip(cur, t_prev)]
            t_prev = [cv - tv for cv, tv in zip(cur, t_prev)]
    return out


def _double_lift(block):
    """Double prefix-sum along both axes (the L^0 -> L^2 index lift)."""
    size = len(block)
    out = [[list(block[r][c]) for c in range(size)] for r in range(size)]
    for _ in range(2):
        for r in range(size):
            for c in range(1, size):
                out[r][c] = [p + q for p, q in zip(out[r][c], out[r][c - 1])]
    out = [[out[c][r] for c in range(size)] for r in range(size)]
    for _ in range(2):
        for r in range(size):
            for c in range(1, size):
                out[r][c] = [p + q for p, q in zip(out[r][c], out[r][c - 1])]
    return [[out[c][r] for c in range(size)] for r in range(size)]


# ---------------------------------------------------------------------------
# Column context
# ---------------------------------------------------------------------------


class _NeedMoreBits(Exception):
    def __init__(self, bits):
        self.bits = bits


class _ColumnContext:
    """All tau-independent material for one (z, order, K, requests) column."""

    def __init__(self, z, order, K, requests, cancel_bits, diag):
        self.z = z
        self.order = order
        self.n_ord = order + 1
        self.K = K
        self.requests = requests
        self.diag = diag
        self.cancel_bits = cancel_bits

        self.F = ((53 + cancel_bits + _GUARD_BITS + 15) // 16) * 16
        self.prec_out = self.F + 64

        t0_max = max(requests.get(0, [0]))
        t1_max = max(requests.get(1, [1]))
        t2_max = max(requests.get(2, [2]))
        need_corner = (0 in requests) or (2 in requests)
        deg_corner = 0
        if 0 in requests:
            deg_corner = max(deg_corner, t0_max)
        if 2 in requests:
            deg_corner = max(deg_corner, t2_max + 1)
        self.Ac = K + deg_corner + 4 if need_corner else 0
        self.S_rows = K + t1_max + 2 if 1 in requests else 0
        if 1 in requests:
            tail_bits = cancel_bits + 53 + _TAIL_GUARD
            self.K_sigma = ladders.sigma_column_count(self.S_rows, z, tail_bits)
        else:
            self.K_sigma = 0

        diag["frac_bits"] = self.F
        diag["corner_size"] = self.Ac
        diag["sigma_rows"] = self.S_rows
        diag["sigma_cols"] = self.K_sigma

        t_start = time.time()
        self._build()
        diag["column_seconds"] = round(time.time() - t_start, 3)

    # -- shared material -----------------------------------------------------

    def _build(self):
        z, order, n_ord = self.z, self.order, self.n_ord
        psi_depth = max(self.Ac, self.K_sigma)
        seed_len = 2 * psi_depth + 8
        psi_prec = ladders.ladder_precision(psi_depth, seed_len, z, self.F)
        self.diag["psi_depth"] = psi_depth
        self.diag["psi_prec"] = psi_prec
        self.at_out = z_atoms(z, order, self.prec_out + 32)

        with specfun.working_precision(psi_prec + 32):
            at = z_atoms(z, order, psi_prec)
            iv1 = ladders.seed_iv1(at, seed_len)
            iv2 = ladders.seed_iv2(at, seed_len)
            a0 = ladders.a0_from_iv1(at, iv1)
            self.a2 = ladders.a2_from_iv2(at, iv2)

            if 1 in self.requests:
                self._stream_sigma()
                big = self._make_big_psi()
            else:
                big = None

            half = gmpy2.mpq(1, 2)
            seed = []
            for m in range(seed_len):
                seed.extend((a0[m] * half).c)

            corner = {}
            Ac, Ks = self.Ac, self.K_sigma

            def consume(l, flat, width):
                if l < Ac:
                    corner[l] = [
                        [flat[m * n_ord + n] for n in range(n_ord)]
                        for m in range(min(width, Ac))
                    ]
                if big is not None and l < Ks:
                    big(l, flat, min(width, Ks))

            ladders.ladder_fill(seed, order, psi_depth, psi_depth, consume)
            if big is not None:
                big.finish()
            self.psi_corner = corner

            if Ac:
                self._build_arc0()
            if 2 in self.requests:
                theta_seed = []
                for m in range(seed_len):
                    theta_seed.extend(iv1[m].c)
                theta = {}

                def consume_theta(l, flat, width):
                    theta[l] = [
                        [flat[m * n_ord + n] for n in range(n_ord)]
                        for m in range(min(width, Ac))
                    ]

                ladders.ladder_fill(theta_seed, order, Ac, Ac, consume_theta)
                self._build_nu2(theta, iv2)
            self.psi_corner = None

        if 1 in self.requests:
            self._build_sandwiches()

    def _build_arc0(self):
        """Arc0[k, kt] = 2 (-1)^k A2[kt] - 2 (ell-combined Psi)[k, kt]."""
        n_ord, Ac = self.n_ord, self.Ac
        arc0 = [[None] * Ac for _ in range(Ac)]
        for kt in range(Ac):
            t_prev = [gmpy2.mpfr(0)] * n_ord
            a2kt = self.a2[kt].c
            for k in range(Ac):
                cur = self.psi_corner[k][kt]
                sign = 1 if k % 2 == 0 else -1
                arc0[k][kt] = [
                    2 * sign * a2kt[n] - 2 * (cur[n] - 2 * t_prev[n])
                    for n in range(n_ord)
                ]
                t_prev = [c - t for c, t in zip(cur, t_prev)]
        self.arc0 = arc0
        self.arc0_bfp = _jet_rows_to_bfp(arc0, self.F, n_ord)
        if 0 in self.requests:
            # 2 t0: triangular exponential-moment pattern, exact integers
            ints = []
            for n in range(n_ord):
                for i in range(Ac):
                    for j in range(Ac):
                        if n or j < i:
                            ints.append(0)
                        elif i == j:
                            ints.append(2)
                        else:
                            ints.append(4 * (-1) ** (i + j))
            self.two_t0_bfp = BFP.from_int_array(ints, n_ord, Ac, Ac, 0)

    # -- nu = 1 material -------------------------------------------------------

    def _stream_sigma(self):
        """U ladder -> sigma' rows -> W (suffix sums), Wtilde, Y, and the
        rank-one arcoth vectors, streamed row by row."""
        z, order, n_ord = self.z, self.order, self.n_ord
        Ks, S, F = self.K_sigma, self.S_rows, self.F
        seed_len = Ks + S + 12
        u_prec = ladders.ladder_precision(S + 2, seed_len, z, self.F, width=Ks)
        self.diag["u_prec"] = u_prec
        w_store, wt_store, y_store = [], [], []
        wq1, wa2 = [], []
        a2 = self.a2

        with specfun.working_precision(u_prec + 32):
            at = z_atoms(z, order, u_prec)
            w_seq, _v = ladders.seed_wv(at, seed_len)
            seed = []
            for m in range(seed_len):
                seed.extend(w_seq[m].c)
            state = {"prev": None}

            def consume(l, flat, width):
                prev = state["prev"]
                cur = flat[: Ks * n_ord]
                if prev is not None:
                    a = l - 1
                    va = [gmpy2.mpfr(0)] * n_ord
                    vb = [gmpy2.mpfr(0)] * n_ord
                    sig = []
                    for i in range(Ks):
                        base = i * n_ord
                        for n in range(n_ord):
                            va[n] += prev[base + n]
                            vb[n] += cur[base + n]
                        scale = gmpy2.mpq(a + 1, i + 1)
                        sig.append([(x - y) * scale for x, y in zip(va, vb)])
                    wrow = [None] * Ks
                    acc = [gmpy2.mpfr(0)] * n_ord
                    for j in range(Ks - 1, -1, -1):
                        acc = [p + q for p, q in zip(acc, sig[j])]
                        wrow[j] = acc
                    suf = _alt_suffix(wrow)
                    q1acc = [gmpy2.mpfr(0)] * n_ord
                    a2acc = [gmpy2.mpfr(0)] * n_ord
                    w_ints = [[] for _ in range(n_ord)]
                    wt_ints = [[] for _ in range(n_ord)]
                    y_ints = [[] for _ in range(n_ord)]
                    for i in range(Ks):
                        sgn = 1 if i % 2 == 0 else -1
                        wi, si = wrow[i], suf[i]
                        prod = Jet(wi) * a2[i]
                        for n in range(n_ord):
                            q1acc[n] += sgn * wi[n]
                            a2acc[n] += prod.c[n]
                            w_ints[n].append(
                                int(gmpy2.mpz(gmpy2.mul_2exp(wi[n], F)))
                            )
                            wt_ints[n].append(
                                int(gmpy2.mpz(gmpy2.mul_2exp(wi[n] + 2 * sgn * si[n], F)))
                            )
                            y_ints[n].append(
                                int(gmpy2.mpz(gmpy2.mul_2exp(2 * wi[n] + 4 * sgn * si[n], F)))
                            )
                    w_store.append(w_ints)
                    wt_store.append(wt_ints)
                    y_store.append(y_ints)
                    wq1.append(q1acc)
                    wa2.append(a2acc)
                state["prev"] = list(cur)

            ladders.ladder_fill(seed, order, S + 1, Ks, consume)

            rank1 = [
                [(Jet(wq1[a]) * Jet(wa2[b])).c for b in range(S)] for a in range(S)
            ]
            self._rank1_bfp = _jet_rows_to_bfp(rank1, F, n_ord)

        def pack(store):
            flat = [
                store[r][n][c]
                for n in range(n_ord)
                for r in range(S)
                for c in range(Ks)
            ]
            return BFP.from_int_array(flat, n_ord, S, Ks, -F)

        self.w_bfp = pack(w_store)
        self.wtilde_bfp = pack(wt_store)
        self.y_bfp = pack(y_store)

    def _make_big_psi(self):
        ctx = self

        class _BigPsi:
            """Streams ladder rows into chunked exact blocks, accumulating
            T1 = Wtilde * Psi without ever materializing Psi."""

            def __init__(self):
                n_limb_est = ctx.F // ladders.LIMB_BITS + 4
                bytes_per_row = ctx.K_sigma * ctx.n_ord * n_limb_est * 8
                self.chunk_size = max(16, min(256, (1 << 27) // max(bytes_per_row, 1)))
                self.pending = []
                self.row0 = 0
                self.t1 = None
                ctx.diag["psi_chunk_rows"] = self.chunk_size

            def __call__(self, l, flat, width):
                row = [gmpy2.mpfr(0)] * (ctx.K_sigma * ctx.n_ord)
                row[: width * ctx.n_ord] = flat[: width * ctx.n_ord]
                self.pending.append(row)
                if len(self.pending) >= self.chunk_size:
                    self.flush()

            def flush(self):
                if not self.pending:
                    return
                rows, self.pending = self.pending, []
                n_ord, Ks, F = ctx.n_ord, ctx.K_sigma, ctx.F
                ints = []
                for n in range(n_ord):
                    for row in rows:
                        for m in range(Ks):
                            ints.append(
                                int(gmpy2.mpz(gmpy2.mul_2exp(row[m * n_ord + n], F)))
                            )
                chunk = BFP.from_int_array(ints, n_ord, len(rows), Ks, -F)
                lo = self.row0
                self.row0 += len(rows)
                wt = ctx.wtilde_bfp
                wt_slice = BFP(
                    np.ascontiguousarray(wt.limbs[:, :, lo : lo + len(rows), :]),
                    wt.exp2,
                )
                prod = wt_slice.matmul(chunk, n_ord)
                self.t1 = prod if self.t1 is None else self.t1 + prod

            def finish(self):
                self.flush()
                ctx.t1_bfp = self.t1.truncated(ctx.F + 64)
                self.t1 = None

        return _BigPsi()

    def _build_sandwiches(self):
        """SAS = W Arc0 W^T and S2 = W (2 t0) W^T, as exact blocks."""
        n_ord = self.n_ord
        t2 = self.t1_bfp.matmul(self.w_bfp.transpose(), n_ord)
        self.sas_bfp = (
            self._rank1_bfp.scaled_int(2) - t2.scaled_int(2)
        ).truncated(self.F + 64)
        self.s2_bfp = self.w_bfp.matmul(self.y_bfp.transpose(), n_ord).truncated(
            self.F + 64
        )
        self.t1_bfp = None
        self.wtilde_bfp = None
        self.w_bfp = None
        self.y_bfp = None
        self._rank1_bfp = None

    # -- nu = 2 material -------------------------------------------------------

    def _build_nu2(self, theta, iv2):
        n_ord, Ac = self.n_ord, self.Ac
        self.arc2_bfp = _jet_rows_to_bfp(_double_lift(self.arc0), self.F, n_ord)

        theta_block = [theta[a] for a in range(Ac)]
        self.theta2l = _ell_pattern(_double_lift(theta_block))

        # E2[a, c] = sum_{j <= min(a,c)} (a-j+1)(c-j+1): double lift of the
        # exponential-moment identity, exact integers; then the same ell
        # pattern along the first index.
        flat = []
        e2l = [[0] * Ac for _ in range(Ac)]
        for c in range(Ac):
            t_prev = 0
            for a in range(Ac):
                cur = sum((a - j + 1) * (c - j + 1) for j in range(min(a, c) + 1))
                e2l[a][c] = cur - 2 * t_prev
                t_prev = cur - t_prev
        for n in range(n_ord):
            for a in range(Ac):
                for c in range(Ac):
                    flat.append(e2l[a][c] if n == 0 else 0)
        self.e2l_bfp = BFP.from_int_array(flat, n_ord, Ac, Ac, 0)

        # double prefix sums of the 1/(2z+x) seed vector and of (-1)^a
        lift1 = [list(iv2[0].c)]
        for m in range(1, Ac):
            lift1.append([p + q for p, q in zip(lift1[-1], iv2[m].c)])
        lift2 = [list(lift1[0])]
        for m in range(1, Ac):
            lift2.append([p + q for p, q in zip(lift2[-1], lift1[m])])
        self.iv2_lift2 = lift2
        self.q1sq = [(a // 2) + 1 for a in range(Ac)]
        self.arc0 = None

    # -- per-tau assembly -------------------------------------------------------

    def _finalize(self, m_arc, m_g, nu, tau, f_used):
        n_ord, K = self.n_ord, self.K
        piece_log = max(_bfp_log2max(m_arc), _bfp_log2max(m_g))
        total = m_arc + m_g
        jets_arr = _bfp_to_jets(total, self.prec_out)
        n_factor = gmpy2.mpq(math.factorial(tau - nu), math.factorial(tau + nu))
        out = np.empty((n_ord, K, K))
        m_max = 0.0
        with specfun.working_precision(self.prec_out):
            gnorm = [
                gmpy2.sqrt(gmpy2.mpq(math.factorial(k), math.factorial(k + nu)))
                for k in range(K)
            ]
            for k in range(K):
                for kt in range(K):
                    scale = n_factor * gnorm[k] * gnorm[kt]
                    sym0 = jets_arr[k][kt][0] + jets_arr[kt][k][0]
                    m_max = max(m_max, abs(float(sym0)))
                    for n in range(n_ord):
                        out[n, k, kt] = float(
                            scale * (jets_arr[k][kt][n] + jets_arr[kt][k][n])
                        )
        cancel_meas = piece_log - math.log2(max(m_max, 1e-300))
        margin = f_used - cancel_meas
        self.diag.setdefault("margins", {})[f"nu{nu}_tau{tau}"] = round(margin, 1)
        if margin < _MARGIN_BITS:
            raise _NeedMoreBits(int(cancel_meas) + _MARGIN_BITS + 24 - 53 - _GUARD_BITS)
        return out

    def assemble(self, nu, tau):
        """Per-tau adaptive wrapper: low tau needs far fewer guard bits than
        the column worst case, so the sandwich runs at a tau-sized budget and
        widens (up to the column budget) only if its measured margin fails."""
        est = _estimate_cancel_bits(self.z, self.K, {nu: [tau]})
        f_tau = min(self.F, ((53 + est + _GUARD_BITS + 15) // 16) * 16)
        while True:
            try:
                return self._assemble_at(nu, tau, f_tau)
            except _NeedMoreBits as exc:
                if f_tau >= self.F:
                    raise
                wider = ((53 + exc.bits + _GUARD_BITS + 15) // 16) * 16
                f_tau = min(self.F, max(wider, f_tau + 32))

    def _assemble_at(self, nu, tau, f_tau):
        n_ord, K, Ac = self.n_ord, self.K, self.Ac
        f_mid = f_tau + 16
        with specfun.working_precision(self.prec_out + 64):
            at = self.at_out
            if nu == 0:
                pin = _jet_rows_to_bfp(
                    _absorb_rows(_poly_p(at, tau), 0, K, Ac, at), f_tau, n_ord
                )
                m_arc = pin.matmul(
                    self.arc0_bfp.truncated(f_mid), n_ord
                ).matmul(pin.transpose(), n_ord)
                g_poly = _poly_g0(at, tau)
                if g_poly:
                    pg = _jet_rows_to_bfp(
                        _absorb_rows(g_poly, 0, K, Ac, at), f_tau, n_ord
                    )
                    m_g = pin.matmul(self.two_t0_bfp, n_ord).matmul(
                        pg.transpose(), n_ord
                    )
                else:
                    m_g = BFP.zeros(n_ord, K, K, 2, -f_tau)
                return self._finalize(m_arc, m_g, nu, tau, f_tau)

            if nu == 1:
                S = self.S_rows
                pi_bfp = _jet_rows_to_bfp(
                    _absorb_rows(_poly_pi1(at, tau), 1, K, S, at), f_tau, n_ord
                )
                zg_bfp = _jet_rows_to_bfp(
                    _absorb_rows(_poly_zg1(at, tau), 1, K, S, at), f_tau, n_ord
                )
                m_arc = pi_bfp.matmul(
                    self.sas_bfp.truncated(f_mid), n_ord
                ).matmul(pi_bfp.transpose(), n_ord)
                m_g = pi_bfp.matmul(
                    self.s2_bfp.truncated(f_mid), n_ord
                ).matmul(zg_bfp.transpose(), n_ord)
                return self._finalize(m_arc, m_g, nu, tau, f_tau)

            # nu == 2
            pi2_bfp = _jet_rows_to_bfp(
                _absorb_rows(_poly_pi2(at, tau), 2, K, Ac, at), f_tau, n_ord
            )
            m_arc = pi2_bfp.matmul(
                self.arc2_bfp.truncated(f_mid), n_ord
            ).matmul(pi2_bfp.transpose(), n_ord)

            pw_poly, rho = _poly_g2_quotient(at, tau)
            pw_rows = _absorb_rows(pw_poly, 2, K, Ac, at)
            pw_bfp = _jet_rows_to_bfp(pw_rows, f_tau, n_ord)
            term2 = _bfp_to_jets(
                pw_bfp.matmul(self.e2l_bfp.transpose(), n_ord), self.prec_out + 64
            )
            # Gpart[kt, a] = 2 q1sq_a [(PW . 2 q1sq)_kt + rho IV2lift_kt]
            #               - 2 (PW E2l^T)[kt, a] - 2 rho Theta2l[a, kt]
            gpart = [[None] * Ac for _ in range(K)]
            for kt in range(K):
                acc = [gmpy2.mpfr(0)] * n_ord
                for c in range(Ac):
                    q = 2 * self.q1sq[c]
                    row = pw_rows[kt][c]
                    for n in range(n_ord):
                        acc[n] += q * row[n]
                bracket = Jet(acc) + rho * Jet(self.iv2_lift2[kt])
                for a in range(Ac):
                    rt = rho * Jet(self.theta2l[a][kt])
                    gpart[kt][a] = [
                        2 * self.q1sq[a] * bracket.c[n]
                        - 2 * term2[kt][a][n]
                        - 2 * rt.c[n]
                        for n in range(n_ord)
                    ]
            m_g = pi2_bfp.matmul(
                _jet_rows_to_bfp(gpart, f_tau, n_ord).transpose(), n_ord
            )
            return self._finalize(m_arc, m_g, nu, tau, f_tau)


# ---------------------------------------------------------------------------
# Public driver
# ---------------------------------------------------------------------------


def _estimate_cancel_bits(z, K, requests):
    """Up-front cancellation estimate from float64 absorb-row norms: the
    arcoth/G cancellation tracks the square of the largest absorb-row norm."""
    worst = 0.0
    for nu, taus in requests.items():
        tau = max(taus)
        if nu == 0:
            F = _binomial_transform(specfun.legendre_p_coeffs(tau, 0))
            poly = [float(f) / z**n for n, f in enumerate(F)]
            bits = 2 * _absorb_norm_bits(poly, 0, K - 1)
        elif nu == 1:
            F = _binomial_transform(specfun.legendre_p_coeffs(tau, 1))
            poly = [0.0] * (tau + 2)
            for n, f in enumerate(F):
                poly[n + 1] += 2.0 * float(f) / z**n
                if n + 2 < len(poly):
                    poly[n + 2] += float(f) / z ** (n + 1)
                else:
                    poly.append(float(f) / z ** (n + 1))
            bits = 2 * _absorb_norm_bits(poly, 1, K - 1)
        else:
            F = _binomial_transform(specfun.legendre_p_coeffs(tau, 2))
            poly = [0.0] * (tau + 3)
            for n, f in enumerate(F):
                poly[n + 2] += 2.0 * float(f) / z ** (n + 1)
                if n + 3 < len(poly):
                    poly[n + 3] += float(f) / z ** (n + 2)
                else:
                    poly.append(float(f) / z ** (n + 2))
            bits = 2 * _absorb_norm_bits(poly, 2, K - 1)
        worst = max(worst, bits + 8 * nu)
    return int(worst) + 28


def assemble_column(z, K, requests, order=0):
    """Assemble B^nu_tau(z) for every requested (nu, tau) at a single z.

    ``requests`` maps nu -> iterable of tau values.  Returns ``(results,
    diagnostics)``; results[(nu, tau)] is a float64 array of shape
    (order+1, K, K) whose slab n holds the n-th Taylor coefficient of B
    about z (slab 0 is the value, slab n the n-th derivative over n!).
    """
    z = float(z)
    if not z > 0.0:
        raise ValueError("z must be positive")
    if K < 1:
        raise ValueError("K must be at least 1")
    requests = {
        int(nu): sorted({int(t) for t in taus}) for nu, taus in requests.items()
    }
    for nu, taus in requests.items():
        if nu not in (0, 1, 2):
            raise ValueError(
                f"kernel order nu={nu} is not supported (only nu = 0, 1, 2)"
            )
        if not taus:
            raise ValueError("empty tau list")
        if taus[0] < nu:
            raise ValueError(f"tau must be >= nu, got tau={taus[0]} for nu={nu}")

    cancel_bits = _estimate_cancel_bits(z, K, requests)
    attempt = 0
    while True:
        attempt += 1
        diag = ColumnDiagnostics()
        diag["z"] = z
        diag["attempt"] = attempt
        diag["cancel_bits_estimate"] = cancel_bits
        try:
            ctx = _ColumnContext(z, order, K, requests, cancel_bits, diag)
            results = {}
            for nu, taus in requests.items():
                for tau in taus:
                    results[(nu, tau)] = ctx.assemble(nu, tau)
            return results, diag
        except _NeedMoreBits as exc:
            if attempt >= _MAX_ATTEMPTS:
                raise RuntimeError(
                    f"kernel assembly failed to reach its accuracy margin at "
                    f"z={z} after {attempt} attempts"
                ) from None
            cancel_bits = max(cancel_bits + 32, exc.bits)


def assemble_B(nu, tau, z, K=40):
    """Single kernel matrix B^nu_tau(z) as a (K, K) float64 array."""
    results, _diag = assemble_column(z, K, {nu: [tau]}, order=0)
    return results[(nu, tau)][0]
