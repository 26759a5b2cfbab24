"""Exact single-electron orbitals of a two-center (diatomic) Coulomb problem.

Separation in prolate spheroidal coordinates (xi, eta, phi) with

    psi = Lambda(xi) * S(eta) * exp(i m phi) / sqrt(2 pi),
    E = -2 (p/R)^2,   Z = (Za+Zb)/2,   dq = (Za-Zb) R >= 0

reduces the problem to an angular eigenvalue problem (Legendre basis, giving
the separation constant lambda at fixed p) coupled to a radial root-finding
problem in p (Laguerre basis at argument x = 2p(xi-1)).  Both conditions are
combined into one scalar function of p -- the radial singularity indicator
evaluated at the angular lambda(p) -- whose n-th largest zero is the n-th
state within fixed (ell, m); the resulting expansions are exact up to
truncation of exponentially decaying coefficient tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq

from .lagalg import DEFAULT_K, ExpansionCoeffs, TruncationError, x_lag_matrix

__all__ = [
    "ConvergenceError",
    "AngularSolution",
    "SpheroidalOrbital",
    "OrbitalOptions",
    "x_leg_matrix",
    "angular_f_matrix",
    "angular_solve",
    "radial_matrices",
    "radial_solve",
    "solve_orbital",
    "energy_curve_single",
]


class ConvergenceError(RuntimeError):
    """The orbital fixed-point iteration or root search failed to converge."""


# ---------------------------------------------------------------------------
# angular problem
# ---------------------------------------------------------------------------

def x_leg_matrix(mu, K):
    """Matrix of multiplication by eta in the orthonormalized P^mu_k basis,
    k = mu .. mu+K-1 (tridiagonal with zero diagonal)."""
    off = np.array([
        math.sqrt((k + 1 - mu) * (k + 1 + mu) / ((2 * k + 1) * (2 * k + 3)))
        for k in range(mu, mu + K - 1)
    ])
    X = np.zeros((K, K))
    idx = np.arange(K - 1)
    X[idx, idx + 1] = off
    X[idx + 1, idx] = off
    return X


def angular_f_matrix(mu, p, delta_q, K):
    """Symmetric matrix of the angular operator in the orthonormalized
    Legendre basis; its eigenvalues are the separation constants lambda."""
    Xe = x_leg_matrix(mu, K + 1)
    X = Xe[:K, :K]
    X2 = (Xe @ Xe)[:K, :K]
    k = np.arange(mu, mu + K)
    F = np.diag(k * (k + 1.0)) + delta_q * X + p ** 2 * (np.eye(K) - X2)
    return F


@dataclass
class AngularSolution:
    """Angular factor S(eta) = sum_k c_k N_k P^mu_k(eta), k = mu..mu+K-1,
    with N_k the L2([-1,1]) normalization of P^mu_k."""

    mu: int
    ell: int
    p: float
    delta_q: float
    lam: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)

    def __len__(self):
        return len(self.coeffs)

    @property
    def parity(self):
        return (-1) ** self.ell

    def norm_sq(self):
        """int S^2 d(eta) = sum c_k^2."""
        return float(self.coeffs @ self.coeffs)

    def __call__(self, eta):
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        vals = legendre_basis(self.mu, len(self.coeffs), eta) @ self.coeffs
        return vals if vals.size > 1 else float(vals[0])


def legendre_basis(mu, K, eta):
    """Orthonormalized associated Legendre values N_k P^mu_k(eta) for
    k = mu..mu+K-1; shape (len(eta), K).  No Condon-Shortley phase."""
    eta = np.asarray(eta, dtype=float)
    out = np.empty((eta.size, K))
    # P^mu_mu = (2mu-1)!! (1-eta^2)^(mu/2)
    pmm = np.ones_like(eta)
    for j in range(1, mu + 1):
        pmm *= (2 * j - 1)
    pmm = pmm * (1.0 - eta ** 2) ** (mu / 2.0)
    pk_m1 = np.zeros_like(eta)
    pk = pmm
    for k in range(mu, mu + K):
        nk = math.sqrt((2 * k + 1) / 2.0
                       * math.factorial(k - mu) / math.factorial(k + mu))
        out[:, k - mu] = nk * pk
        pk_p1 = ((2 * k + 1) * eta * pk - (k + mu) * pk_m1) / (k - mu + 1)
        pk_m1, pk = pk, pk_p1
    return out


def angular_solve(mu, ell, p, delta_q, K=None):
    """Separation constant and Legendre coefficients for the (mu, ell) state.

    The angular operator has a simple spectrum (Sturm-Liouville), so the
    (ell-mu)-th smallest eigenvalue identifies the state for every p and
    delta_q; no level crossings occur.
    """
    if not ell >= mu >= 0:
        raise ValueError("require ell >= mu >= 0")
    if K is None:
        K = DEFAULT_K + ell - mu
    if K <= ell - mu:
        raise ValueError("K too small for requested ell")
    F = angular_f_matrix(mu, p, delta_q, K)
    w, v = eigh(F)
    idx = ell - mu
    lam = float(w[idx])
    c = v[:, idx]
    # Meixner normalization: sum c_k^2 = 2/(2l+1) (l+mu)!/(l-mu)!
    target = 2.0 / (2 * ell + 1) * math.factorial(ell + mu) / math.factorial(ell - mu)
    c = c * math.sqrt(target)          # eigh returns unit vectors
    if c[idx] < 0:
        c = -c
    if delta_q == 0:
        # exact parity: only k with (-1)^k = (-1)^ell contribute
        mask = (np.arange(mu, mu + K) - ell) % 2 != 0
        c[mask] = 0.0
    return AngularSolution(mu, ell, p, delta_q, lam, c)


# ---------------------------------------------------------------------------
# radial problem
# ---------------------------------------------------------------------------

def radial_matrices(mu, p, ZR, lam, K):
    """Symmetric tridiagonal pair (B, R) of the radial coefficient problem
    (B R + p mu^2 I) d = 0 in the Laguerre basis at x = 2p(xi-1)."""
    k = np.arange(K)
    off = -np.sqrt((k[:-1] + 1) * (k[:-1] + mu + 1))
    B_diag = (2 * k + mu + 1) + 4.0 * p
    R_diag = (-2 * k * k - 2 * k * (mu + 1 + 2 * p) - 2 * p * (mu + 1)
              - mu - (mu * mu + 4) / 4.0 + 2 * ZR - lam
              + ZR * (mu + 2 * k + 1) / p)
    R_off = -off * (k[:-1] + mu / 2.0 + 1 - ZR / p)
    B = np.diag(B_diag) + np.diag(off, 1) + np.diag(off, -1)
    R = np.diag(R_diag) + np.diag(R_off, 1) + np.diag(R_off, -1)
    return B, R


def _signed_mineig(mu, p, ZR, lam, K):
    """Singularity indicator of the radial problem: sign(det S) * min|eig S|
    with S = R + p mu^2 B^{-1}; changes sign exactly where (B R + p mu^2 I)
    is singular, i.e. at radial solutions."""
    B, R = radial_matrices(mu, p, ZR, lam, K)
    S = R
    if mu:
        S = R + p * mu * mu * np.linalg.inv(B)
    w = np.linalg.eigvalsh(S)
    sign = -1.0 if (w < 0).sum() % 2 else 1.0
    return sign * float(np.min(np.abs(w)))


def _radial_root_function(mu, lam, ZR, K):
    """f(p) at fixed separation constant lambda."""

    def f(p):
        return _signed_mineig(mu, p, ZR, lam, K)

    return f


def _self_consistent_root_function(mu, ell, ZR, delta_q, K, K_ang):
    """h(p): the radial indicator evaluated at the self-consistent angular
    eigenvalue lambda(p).  Zeros of h are exactly the orbital parameters p;
    the j-th largest zero is the state n = j within fixed (ell, m)."""

    def h(p):
        lam = angular_solve(mu, ell, p, delta_q, K_ang).lam
        return _signed_mineig(mu, p, ZR, lam, K)

    return h


def _radial_eigenvector(mu, lam, ZR, p, K):
    B, R = radial_matrices(mu, p, ZR, lam, K)
    S = R
    if mu:
        S = R + p * mu * mu * np.linalg.inv(B)
    w, v = np.linalg.eigh(S)
    order = np.argsort(np.abs(w))
    scale = max(1.0, float(np.abs(w).max()))
    if abs(w[order[1]]) < 1e-10 * scale:
        raise ConvergenceError(
            f"degenerate radial null space at p={p:.12g} (mu={mu})")
    d = v[:, order[0]]
    if d[0] < 0:
        d = -d
    return d


def radial_solve(mu, lam, ZR, p_init, K=None):
    """Energy parameter p (root nearest p_init) and radial coefficients d.

    Bound states have 0 < p < ZR (united-atom limit p = ZR/n).  Returns
    (p, d) with ||d|| = 1 and d[0] > 0.
    """
    if K is None:
        K = DEFAULT_K
    if not 0 < p_init:
        raise ValueError("p_init must be > 0")
    f = _radial_root_function(mu, lam, ZR, K)
    p_floor = 1e-9 * max(ZR, 1.0)
    p_cap = 1.25 * ZR
    width = max(0.02 * p_init, 1e-5 * ZR)
    for _ in range(60):
        lo = max(p_init - width, p_floor)
        hi = min(p_init + width, p_cap)
        grid = np.linspace(lo, hi, 101)
        fv = np.array([f(x) for x in grid])
        best = None
        for j in range(len(grid) - 1):
            if fv[j] * fv[j + 1] <= 0:
                mid = 0.5 * (grid[j] + grid[j + 1])
                if best is None or abs(mid - p_init) < abs(best[2] - p_init):
                    best = (grid[j], grid[j + 1], mid)
        if best is not None:
            p = brentq(f, best[0], best[1], xtol=1e-14, rtol=8.9e-16,
                       maxiter=200)
            return p, _radial_eigenvector(mu, lam, ZR, p, K)
        if lo <= p_floor and hi >= p_cap:
            break
        width *= 2.5
    raise ConvergenceError(
        f"no radial root near p_init={p_init:.6g} (mu={mu}, ZR={ZR:.6g})")


def _enumerate_roots(f, ZR, n_needed, n_tilde):
    """Largest n_needed zeros of f(p), descending in p (= ascending energy).
    Roots cluster near p = ZR/j (united-atom limit), so the scan grid is
    uniform in u = ZR/p."""
    u_lo = 0.55
    u_hi = n_tilde + 2.5
    density = 40
    roots = []
    while len(roots) < n_needed:
        grid = np.linspace(u_lo, u_hi, max(60, int((u_hi - u_lo) * density)))
        pvals = ZR / grid
        roots = []
        fprev = f(pvals[0])
        for j in range(1, len(pvals)):
            fcur = f(pvals[j])
            if fprev * fcur < 0:
                roots.append(brentq(f, pvals[j], pvals[j - 1],
                                    xtol=1e-14, rtol=8.9e-16, maxiter=200))
                if len(roots) >= n_needed:
                    break
            fprev = fcur
        if len(roots) >= n_needed:
            break
        if u_hi > 8 * (n_tilde + 2):
            raise ConvergenceError(
                f"only {len(roots)} radial roots found (need {n_needed}) "
                f"for ZR={ZR:.6g}")
        u_hi *= 2.0
        density *= 2
    return roots  # descending in p


# ---------------------------------------------------------------------------
# coupled solve
# ---------------------------------------------------------------------------

@dataclass
class OrbitalOptions:
    K: int = DEFAULT_K          # radial truncation
    K_ang: int = None           # angular truncation (defaults to K + ell - mu)
    tol: float = 1e-12          # fixed-point tolerance on p
    max_iter: int = 200
    tail_tol: float = 1e-11    # relative coefficient-tail requirement


@dataclass
class SpheroidalOrbital:
    """A normalized single-electron two-center orbital."""

    Za: float
    Zb: float
    R: float
    n: int
    ell: int
    m: int
    p: float
    lam: float
    energy: float
    norm: float                 # ||psi|| of the raw unit-coefficient solution
    angular: AngularSolution
    radial: ExpansionCoeffs     # Lambda(xi) = radial(xi - 1), scale 2p

    @property
    def E(self):
        return self.energy

    @property
    def mu(self):
        return abs(self.m)

    @property
    def ZR(self):
        return 0.5 * (self.Za + self.Zb) * self.R

    @property
    def delta_q(self):
        return (self.Za - self.Zb) * self.R

    @property
    def parity_sign(self):
        """Spatial parity (-1)^ell; meaningful for the homonuclear case."""
        return (-1) ** self.ell

    @property
    def parity(self):
        """'g' or 'u' for homonuclear systems, None otherwise."""
        if self.Za != self.Zb:
            return None
        return "g" if self.parity_sign == 1 else "u"

    def Lambda(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.radial(xi - 1.0)

    def S(self, eta):
        return self.angular(eta)

    def __call__(self, xi, eta, phi=0.0):
        """Complex orbital value psi(xi, eta, phi)."""
        radial = self.Lambda(xi)
        angular = self.S(eta)
        return (radial * angular
                * np.exp(1j * self.m * np.asarray(phi)) / math.sqrt(2 * math.pi))

    def label(self):
        letter = "spdfghik"[self.ell] if self.ell < 8 else f"(l={self.ell})"
        mchar = {0: "sigma", 1: "pi", 2: "delta", 3: "phi"}.get(self.mu,
                                                                f"(m={self.m})")
        return f"{self.n}{letter}{mchar}{self.parity or ''}"

    def to_dict(self):
        return {
            "label": self.label(),
            "Za": self.Za, "Zb": self.Zb, "R": self.R,
            "n": self.n, "ell": self.ell, "m": self.m,
            "p": self.p, "lambda": self.lam, "E": self.energy,
            "norm": self.norm,
            "c": self.angular.coeffs.tolist(),
            "d": self.radial.coeffs.tolist(),
        }


def _norm_factor(c, d, p, R, mu):
    """||psi||^2 from the expansion coefficients."""
    K = len(d)
    X = x_lag_matrix(mu, K)            # (K+1) x K
    d_aug = np.zeros(K + 1)
    d_aug[:K] = d
    d_aug += X @ d / (2.0 * p)
    Xleg = x_leg_matrix(mu, len(c))
    return ((R / 2.0) ** 3 / (2.0 * p)
            * (float(c @ c) * float(d_aug @ d_aug)
               - float((Xleg @ c) @ (Xleg @ c)) * float(d @ d)))


def solve_orbital(Za, Zb, R, n, ell, m, opts=None):
    """Solve the two-center problem for the orbital labeled (n, ell, m).

    n = 1, 2, ... counts successive energy levels within fixed (ell, m),
    matching the united-atom labels at R -> 0 (principal number n + ell).
    Requires Za >= Zb (relabel the nuclei otherwise).
    """
    if Za < Zb:
        raise ValueError("label nuclei so that Za >= Zb")
    if not (n >= 1 and ell >= abs(m) >= 0):
        raise ValueError("invalid quantum numbers: need n >= 1, ell >= |m|")
    if opts is None:
        opts = OrbitalOptions()
    mu = abs(m)
    Z = 0.5 * (Za + Zb)
    ZR = Z * R
    delta_q = (Za - Zb) * R
    K = opts.K
    K_ang = opts.K_ang if opts.K_ang is not None else DEFAULT_K + ell - mu
    n_tilde = n + ell

    for attempt in range(4):
        h = _self_consistent_root_function(mu, ell, ZR, delta_q, K, K_ang)
        roots = _enumerate_roots(h, ZR, n, n_tilde)
        p = roots[n - 1]
        ang = angular_solve(mu, ell, p, delta_q, K_ang)
        d = _radial_eigenvector(mu, ang.lam, ZR, p, K)
        c = ang.coeffs
        tail_c = np.max(np.abs(c[-2:])) / np.max(np.abs(c))
        tail_d = np.max(np.abs(d[-2:])) / np.max(np.abs(d))
        if tail_c <= opts.tail_tol and tail_d <= opts.tail_tol:
            break
        if attempt == 3:
            raise TruncationError(
                f"coefficient tails do not decay below {opts.tail_tol:.1e} "
                f"even at K={K}, K_ang={K_ang}")
        if tail_c > opts.tail_tol:
            K_ang = 2 * K_ang
        if tail_d > opts.tail_tol:
            K = 2 * K

    norm2 = _norm_factor(c, d, p, R, mu)
    if not norm2 > 0:
        raise ConvergenceError("non-positive norm; truncation too small")
    d_normed = d / math.sqrt(norm2)
    energy = -2.0 * (p / R) ** 2
    return SpheroidalOrbital(
        Za=Za, Zb=Zb, R=R, n=n, ell=ell, m=m, p=p, lam=ang.lam, energy=energy,
        norm=math.sqrt(norm2),
        angular=ang,
        radial=ExpansionCoeffs(mu, 2.0 * p, d_normed),
    )


def energy_curve_single(Za, Zb, states, ZR_grid, opts=None):
    """Electronic energies E(R) for the given (n, ell, m) states on a grid of
    ZR values.  Besides raw E the table carries the charge-scaled energy
    E/Z^2 (united-atom comparison) and the net attraction E/Z^2 + 1/(ZR)
    (dissociation comparison).  Per-point solve failures are recorded as NaN
    without aborting the scan."""
    Z = 0.5 * (Za + Zb)
    ZR_grid = np.asarray(ZR_grid, dtype=float)
    R_grid = ZR_grid / Z
    energies, pvals, scaled, net = {}, {}, {}, {}
    failures = []
    for state in states:
        n, ell, m = state
        Es = np.full(len(R_grid), np.nan)
        ps = np.full(len(R_grid), np.nan)
        for j, R in enumerate(R_grid):
            try:
                orb = solve_orbital(Za, Zb, float(R), n, ell, m, opts)
            except (ConvergenceError, TruncationError) as exc:
                failures.append((tuple(state), float(R), str(exc)))
                continue
            Es[j] = orb.energy
            ps[j] = orb.p
        energies[tuple(state)] = Es
        pvals[tuple(state)] = ps
        scaled[tuple(state)] = Es / Z ** 2
        net[tuple(state)] = Es / Z ** 2 + 1.0 / ZR_grid
    return {"R": R_grid, "ZR": ZR_grid, "energies": energies, "p": pvals,
            "E_over_Z2": scaled, "net_attraction": net, "failures": failures}
