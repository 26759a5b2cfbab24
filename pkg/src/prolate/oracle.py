"""Independent brute-force verification backends.

Adaptive arbitrary-precision quadrature (single and nested) and a 2D
finite-difference eigensolver for the two-center problem.  Everything here is
test support: slow, generic, and deliberately ignorant of the closed forms it
is used to check.  Nothing on the production path imports this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

__all__ = ["QuadratureSpec", "adaptive_quad", "quad", "nested_quad", "fd_orbital"]


@dataclass
class QuadratureSpec:
    """One integral: integrand, domain, and accuracy targets.

    ``b`` may be ``math.inf``; semi-infinite domains are truncated where the
    integrand falls below ``tail_eps`` times the observed scale (all
    integrands of interest decay exponentially).
    """

    integrand: Callable
    a: float = 0.0
    b: float = math.inf
    rtol: float = 1e-13
    dps: int = 30
    max_subdivisions: int = 10
    tail_eps: float = 1e-40
    split_points: tuple = field(default_factory=tuple)


def _truncate_tail(f, a, tail_eps, scale_hint=1.0):
    """Find a finite cutoff after which |f| stays below tail_eps * scale."""
    scale = scale_hint
    x = max(a, 1.0)
    hits = 0
    for _ in range(400):
        v = abs(float(f(mpmath.mpf(x))))
        scale = max(scale, v)
        if v < tail_eps * scale:
            hits += 1
            if hits >= 3:
                return x
        else:
            hits = 0
        x = x * 1.25 + 1.0
    raise RuntimeError("integrand does not appear to decay; cannot truncate tail")


def adaptive_quad(spec: QuadratureSpec):
    """Evaluate ``spec`` and return (value, error_estimate) with mpf value."""
    with mpmath.workdps(spec.dps):
        a, b = mpmath.mpf(spec.a), spec.b
        if math.isinf(spec.b):
            b = mpmath.mpf(_truncate_tail(spec.integrand, spec.a, spec.tail_eps))
        points = [a] + [mpmath.mpf(p) for p in spec.split_points if a < p < b] + [b]
        best = None
        for attempt in range(spec.max_subdivisions):
            val, err = mpmath.quad(spec.integrand, points, error=True,
                                   maxdegree=min(6 + attempt, 10))
            err = abs(err)
            best = (val, float(err))
            if err <= spec.rtol * (1 + abs(val)):
                return best
            if attempt >= 2 and len(points) < 64:
                # refine the partition instead of only deepening the rule
                mids = []
                for lo, hi in zip(points[:-1], points[1:]):
                    mids.extend([lo, (lo + hi) / 2])
                points = mids + [points[-1]]
        return best


def quad(f, a=0.0, b=math.inf, rtol=1e-13, dps=30, split_points=()):
    """Convenience wrapper returning the value only."""
    return adaptive_quad(QuadratureSpec(f, a, b, rtol=rtol, dps=dps,
                                        split_points=tuple(split_points)))[0]


def nested_quad(outer_integrand, inner_integrand, outer_domain=(0.0, math.inf),
                inner_domain=None, rtol=1e-12, dps=30, outer_splits=()):
    """Two-level integral with the inner tolerance 10x tighter.

    Computes  integral over xt of  outer_integrand(xt, I(xt))  where
    I(xt) = integral of inner_integrand(x, xt) over inner_domain(xt).
    ``inner_domain`` defaults to (0, xt) (the nested triangular case).
    """
    if inner_domain is None:
        inner_domain = lambda xt: (0.0, xt)

    inner_rtol = rtol / 10

    def outer_f(xt):
        lo, hi = inner_domain(xt)
        if not hi > lo:
            return outer_integrand(xt, mpmath.mpf(0))
        inner = ierr = None
        for deg in (6, 8, 10):
            inner, ierr = mpmath.quad(lambda x: inner_integrand(x, xt),
                                      [lo, (lo + hi) / 2, hi],
                                      error=True, maxdegree=deg)
            if abs(ierr) <= inner_rtol * (1 + abs(inner)):
                break
        return outer_integrand(xt, inner)

    # the inner calls share the mpmath working precision set by adaptive_quad
    spec = QuadratureSpec(outer_f, outer_domain[0], outer_domain[1],
                          rtol=rtol, dps=dps, split_points=tuple(outer_splits))
    return adaptive_quad(spec)[0]


def fd_orbital(Za, Zb, R, m, grid=(240, 120, 16.0), n_eigs=4):
    """Lowest two-center eigenvalues from a 2D finite-difference scheme.

    Cell-centered second-order discretization of the (xi, eta) equation at
    fixed |m|, Dirichlet at xi_max, natural conditions at the coordinate
    boundaries where the diffusion coefficients vanish.  Returns the lowest
    ``n_eigs`` electronic energies (a.u.), accurate to roughly 1e-4..1e-5
    relative on the default grids; Richardson extrapolation over two grids
    is the caller's job when more is needed.
    """
    n_xi, n_eta, xi_max = grid
    mu = abs(int(m))
    ZR = (Za + Zb) / 2.0 * R
    dq = (Za - Zb) * R

    h_xi = (xi_max - 1.0) / n_xi
    h_eta = 2.0 / n_eta
    xi_c = 1.0 + (np.arange(n_xi) + 0.5) * h_xi
    eta_c = -1.0 + (np.arange(n_eta) + 0.5) * h_eta
    xi_f = 1.0 + np.arange(n_xi + 1) * h_xi
    eta_f = -1.0 + np.arange(n_eta + 1) * h_eta

    a_xi = (xi_f ** 2 - 1.0) / h_xi ** 2      # flux coefficients on xi faces
    a_eta = (1.0 - eta_f ** 2) / h_eta ** 2   # flux coefficients on eta faces
    a_eta[0] = a_eta[-1] = 0.0                # exact zeros, kill rounding dust
    a_xi[0] = 0.0

    N = n_xi * n_eta
    idx = lambda i, j: i * n_eta + j

    rows, cols, vals = [], [], []
    diag = np.zeros(N)
    XI, ETA = np.meshgrid(xi_c, eta_c, indexing="ij")
    pot = (2.0 * ZR * XI - dq * ETA
           - mu ** 2 / (XI ** 2 - 1.0) - mu ** 2 / (1.0 - ETA ** 2))
    diag += pot.ravel()

    for i in range(n_xi):
        for j in range(n_eta):
            k = idx(i, j)
            # xi couplings
            if i + 1 < n_xi:
                rows.append(k); cols.append(idx(i + 1, j)); vals.append(a_xi[i + 1])
                diag[k] -= a_xi[i + 1]
            else:
                diag[k] -= 2.0 * a_xi[i + 1]   # Dirichlet at xi_max face
            diag[k] -= a_xi[i]
            # eta couplings
            if j + 1 < n_eta:
                rows.append(k); cols.append(idx(i, j + 1)); vals.append(a_eta[j + 1])
                diag[k] -= a_eta[j + 1]
            diag[k] -= a_eta[j]

    A = sparse.coo_matrix((vals, (rows, cols)), shape=(N, N))
    A = (A + A.T + sparse.diags(diag)).tocsc()
    Mdiag = (XI ** 2 - ETA ** 2).ravel()
    M = sparse.diags(Mdiag).tocsc()

    # A psi = kappa M psi with kappa = p^2; bound states sit at the top of
    # the spectrum, so shift-invert from just above it.
    sigma = (1.05 * ZR + 1.0) ** 2
    kappa = eigsh(A, k=n_eigs, M=M, sigma=sigma, which="LM",
                  return_eigenvectors=False)
    kappa = np.sort(kappa)[::-1]
    return -2.0 * kappa / R ** 2
