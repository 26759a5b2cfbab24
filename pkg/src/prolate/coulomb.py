"""Two-electron Coulomb and exchange integrals of two-center orbitals.

For orbitals a, b, c, d of one diatomic system the integral

    <ab|cd> = int conj(a)(x1) b(x1) 1/|x1-x2| conj(c)(x2) d(x2) dx1 dx2

is evaluated without numerical quadrature by expanding 1/|x1-x2| in prolate
spheroidal coordinates into products of Legendre functions:

    1/|x1-x2| = (4/R) sum_{tau, nu} (-1)^nu eps_nu (2 tau + 1)/2
                ((tau-nu)!/(tau+nu)!)^2 P^nu_tau(xi_<) Q^nu_tau(xi_>)
                P^nu_tau(eta_1) P^nu_tau(eta_2) cos(nu (phi_1 - phi_2))

with eps_0 = 1 and eps_nu = 2 otherwise.  The phi integrals select a single
nu = |m - m'| (with weight 1/eps_nu) and enforce m + m~ = m' + m~'; the eta
integrals contract the orbitals' Legendre expansions against P^nu_tau
through Wigner 3j symbols; and the nested xi integrals reduce to bilinear
forms u . B^nu_tau(z) . v over the precomputed radial kernel matrices, where
u, v are Laguerre coefficients of the orbital-pair products Lambda_i
Lambda_i' rescaled to the common argument scale z and each side carries a
1/z Jacobian from the change of variables xi -> x = z (xi - 1).

The volume element (R/2)^3 (xi^2 - eta^2) per electron is expanded into the
four (xi^2, eta^2) cross terms; xi^2 = (1 + x/z)^2 folds into the radial
coefficient vectors via the tridiagonal multiply-by-x operator, and eta^2
folds into the angular contraction via the Legendre multiply-by-eta
operator applied twice.

The sum over tau converges exponentially; by default it is truncated at
tau_max = 9 and a warning reports the shell trace if the last shell still
exceeds 1e-9 of the total.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .lagalg import (ExpansionCoeffs, TruncationError, multiply, rescale,
                     x_lag_matrix)
from .orbital import AngularSolution, SpheroidalOrbital, x_leg_matrix
from .kernel.assemble import assemble_column
from .kernel.tables import DEFAULT_K, KernelTableSet

__all__ = [
    "ConvergenceWarning",
    "CoulombEngine",
    "CoulombSpec",
    "angular_integral",
    "coulomb_integral",
    "phi_selection",
    "radial_integral",
    "radial_pair",
    "tau_convergence_report",
]


class ConvergenceWarning(UserWarning):
    """The multipole sum was truncated before reaching its tolerance."""


# ---------------------------------------------------------------------------
# phi selection
# ---------------------------------------------------------------------------


def phi_selection(m1: int, m1p: int, m2: int, m2p: int) -> Optional[Tuple[int, float]]:
    """Azimuthal selection rule of the two phi integrals.

    For electron densities conj(psi_{m1}) psi_{m1p} and conj(psi_{m2})
    psi_{m2p} the integrals are non-zero only when m1 - m1p = -(m2 - m2p);
    then exactly one multipole order nu = |m1 - m1p| survives, with weight
    1/eps_nu.  Returns (nu, weight), or None when the integral vanishes
    exactly.
    """
    if m1 - m1p != -(m2 - m2p):
        return None
    nu = abs(m1 - m1p)
    return nu, 1.0 if nu == 0 else 0.5


# ---------------------------------------------------------------------------
# angular contraction
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _w3j(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    from sympy.physics.wigner import wigner_3j  # deferred: heavy import
    return float(wigner_3j(l1, l2, l3, m1, m2, m3))


@lru_cache(maxsize=None)
def _triple_legendre_norm(k1: int, mu1: int, k2: int, mu2: int,
                          tau: int, nu: int) -> float:
    """Integral of (orthonormal P^mu1_k1)(orthonormal P^mu2_k2) P^nu_tau.

    The first two factors carry their L2([-1,1]) normalization, the third is
    the plain Legendre function.  Evaluated through the Wigner-3j expression
    for the triple-Legendre overlap; requires nu = |mu1 - mu2| or
    nu = mu1 + mu2 (guaranteed by the phi selection rule).
    """
    if tau < nu:
        return 0.0
    if (k1 + k2 + tau) % 2:
        return 0.0
    if not (abs(k1 - k2) <= tau <= k1 + k2):
        return 0.0
    if mu1 < mu2:
        k1, mu1, k2, mu2 = k2, mu2, k1, mu1
    w000 = _w3j(k1, k2, tau, 0, 0, 0)
    if w000 == 0.0:
        return 0.0
    if nu == mu1 - mu2:
        branch = (-1) ** (mu2 + nu) * _w3j(k1, k2, tau, mu1, -mu2, -nu)
    elif nu == mu1 + mu2:
        branch = (-1) ** nu * _w3j(k1, k2, tau, mu1, mu2, -nu)
    else:
        raise ValueError(
            f"nu={nu} incompatible with orders mu1={mu1}, mu2={mu2}"
        )
    if branch == 0.0:
        return 0.0
    # fold the two orthonormalization factors and clear the 1/2 prefactor:
    # N_k sqrt((k-mu)!/(k+mu)!)^-1 = sqrt((2k+1)/2), third factor plain
    scale = math.sqrt(
        (2 * k1 + 1)
        * (2 * k2 + 1)
        * math.factorial(tau + nu)
        / math.factorial(tau - nu)
    )
    return scale * w000 * branch


def _eta_squared(coeffs: np.ndarray, mu: int) -> np.ndarray:
    """Coefficients of eta^2 * S in the orthonormal Legendre basis."""
    padded = np.zeros(len(coeffs) + 2)
    padded[: len(coeffs)] = coeffs
    X = x_leg_matrix(mu, len(padded))
    return X @ (X @ padded)


def angular_integral(a1: AngularSolution, a2: AngularSolution,
                     tau: int, nu: int, j: int = 0) -> float:
    """Angular factor int S_1(eta) S_2(eta) P^nu_tau(eta) eta^j d(eta)."""
    if j not in (0, 2):
        raise ValueError("j must be 0 or 2")
    c1 = a1.coeffs
    c2 = a2.coeffs if j == 0 else _eta_squared(a2.coeffs, a2.mu)
    total = 0.0
    for i1, v1 in enumerate(c1):
        if v1 == 0.0:
            continue
        k1 = a1.mu + i1
        for i2, v2 in enumerate(c2):
            if v2 == 0.0:
                continue
            k2 = a2.mu + i2
            t = _triple_legendre_norm(k1, a1.mu, k2, a2.mu, tau, nu)
            if t:
                total += v1 * v2 * t
    return total


def _parity_allows(a1: AngularSolution, a2: AngularSolution,
                   tau: int, nu: int) -> bool:
    """Homonuclear parity rule: the integrand must be even in eta.

    S factors have parity (-1)^(ell+mu) when delta_q = 0 and P^nu_tau has
    (-1)^(tau+nu); eta^j with j in {0, 2} is even, so the sum
    ell1+mu1+ell2+mu2+tau+nu must be even for a non-zero integral.
    """
    if a1.delta_q != 0.0 or a2.delta_q != 0.0:
        return True
    return (a1.ell + a1.mu + a2.ell + a2.mu + tau + nu) % 2 == 0


# ---------------------------------------------------------------------------
# radial contraction
# ---------------------------------------------------------------------------


def radial_pair(o1: SpheroidalOrbital, o2: SpheroidalOrbital,
                tail_tol: float = 1e-10) -> ExpansionCoeffs:
    """Laguerre expansion of the product Lambda_1(xi) Lambda_2(xi).

    Both factors live at their own argument scale 2p; the product is
    expressed at the mean scale p1 + p2 in the basis of order
    nu = |m1 - m2|, matching the multipole order selected by the phi
    integrals.  The orbitals' normalization factors are already folded into
    their radial coefficients.
    """
    return multiply(o1.radial, o2.radial, o1.m, o2.m, tail_tol=tail_tol)


def _fold_xi_squared(coeffs: np.ndarray, mu: int, z: float) -> np.ndarray:
    """Coefficients of xi^2 * H_d with xi = 1 + x/z: (I + X/z)^2 d."""
    x1 = x_lag_matrix(mu, len(coeffs)) @ coeffs          # x * d, length +1
    x2 = x_lag_matrix(mu, len(x1)) @ x1                  # x^2 * d, length +2
    out = x2 / (z * z)
    out[: len(coeffs)] += coeffs
    out[: len(x1)] += (2.0 / z) * x1
    return out


def _contraction_vector(pair: ExpansionCoeffs, z: float, j: int,
                        k_dim: int, tail_tol: float = 1e-9) -> np.ndarray:
    """Rescale a pair expansion to scale z, fold xi^j, clip to k_dim."""
    if abs(pair.scale - z) > 1e-14 * z:
        pair = rescale(pair, z)
    vec = pair.coeffs if j == 0 else _fold_xi_squared(pair.coeffs, pair.mu, z)
    if len(vec) > k_dim:
        peak = np.max(np.abs(vec))
        spill = np.max(np.abs(vec[k_dim:]))
        if peak and spill > tail_tol * peak:
            raise TruncationError(
                f"pair expansion needs {len(vec)} kernel rows but only "
                f"{k_dim} are available (spill {spill / peak:.2e}); "
                f"increase the kernel dimension"
            )
        vec = vec[:k_dim]
    return vec


def radial_integral(pair_a: ExpansionCoeffs, pair_b: ExpansionCoeffs,
                    nu: int, tau: int, j: int, jt: int, tables) -> float:
    """Nested radial integral as a kernel-matrix bilinear form.

    Evaluates u . B^nu_tau(z) . v / z^2 with z the common argument scale of
    the two pair expansions, u, v their coefficient vectors with xi^j and
    xi^jt folded in, and B the symmetrized radial kernel (which already
    contains both nesting orders and one (tau-nu)!/(tau+nu)! factor).
    ``tables`` is anything with an ``eval_B(nu, tau, z)`` method.
    """
    if j not in (0, 2) or jt not in (0, 2):
        raise ValueError("j and jt must be 0 or 2")
    z = 0.5 * (pair_a.scale + pair_b.scale)
    B = tables.eval_B(nu, tau, z)
    k_dim = B.shape[0]
    u = _contraction_vector(pair_a, z, j, k_dim)
    v = _contraction_vector(pair_b, z, jt, k_dim)
    return float(u @ B[: len(u), : len(v)] @ v) / (z * z)


# ---------------------------------------------------------------------------
# full integral
# ---------------------------------------------------------------------------


@dataclass
class CoulombSpec:
    """Four orbitals of one system: <bra1 ket1 | bra2 ket2>."""

    bra1: SpheroidalOrbital
    ket1: SpheroidalOrbital
    bra2: SpheroidalOrbital
    ket2: SpheroidalOrbital
    tau_max: int = 9

    def __post_init__(self):
        ref = self.bra1
        for o in (self.ket1, self.bra2, self.ket2):
            if (o.Za, o.Zb, o.R) != (ref.Za, ref.Zb, ref.R):
                raise ValueError(
                    "all four orbitals must share the same nuclei and "
                    "internuclear distance"
                )

    @property
    def orbitals(self):
        return (self.bra1, self.ket1, self.bra2, self.ket2)


class _DirectKernel:
    """eval_B fallback that assembles kernel columns on demand (no cache
    directory).  All tau of one kernel order share a column context, so the
    first request at a given (nu, z) amortizes the whole tau range."""

    def __init__(self, tau_max: int, k_dim: int):
        self.tau_max = tau_max
        self.k_dim = k_dim
        self._columns: Dict[Tuple[int, float], Dict[int, np.ndarray]] = {}

    def eval_B(self, nu: int, tau: int, z: float) -> np.ndarray:
        zkey = round(float(z), 12)
        col = self._columns.get((nu, zkey))
        if col is None:
            taus = list(range(nu, max(self.tau_max, tau) + 1))
            results, _diag = assemble_column(zkey, self.k_dim, {nu: taus})
            col = {t: results[(nu, t)][0] for t in taus}
            self._columns[(nu, zkey)] = col
        return col[tau]


class CoulombEngine:
    """Evaluates Coulomb integrals with memoized intermediates.

    ``tables`` is a KernelTableSet (fast Taylor evaluation from the disk
    cache) or None, in which case kernel matrices are assembled directly at
    the exact z values encountered (slower per new z, but exact and
    self-contained).  Pair products, rescaled contraction vectors and
    angular factors are cached per orbital identity, which diagonal
    many-electron matrix elements reuse heavily.
    """

    def __init__(self, tables: Optional[KernelTableSet] = None, *,
                 tau_max: int = 9, k_dim: Optional[int] = None):
        self.tau_max = int(tau_max)
        if tables is not None:
            self.kernel = tables
            self.k_dim = tables.k_dim if k_dim is None else int(k_dim)
        else:
            self.k_dim = DEFAULT_K if k_dim is None else int(k_dim)
            self.kernel = _DirectKernel(self.tau_max, self.k_dim)
        self._pairs: Dict[tuple, ExpansionCoeffs] = {}
        self._vectors: Dict[tuple, np.ndarray] = {}
        self._angular: Dict[tuple, float] = {}

    @staticmethod
    def _okey(o: SpheroidalOrbital) -> tuple:
        return (o.n, o.ell, o.m, round(o.p, 13))

    def pair(self, o1: SpheroidalOrbital, o2: SpheroidalOrbital) -> ExpansionCoeffs:
        key = tuple(sorted((self._okey(o1), self._okey(o2))))
        out = self._pairs.get(key)
        if out is None:
            out = radial_pair(o1, o2)
            self._pairs[key] = out
        return out

    def _vector(self, o1, o2, z: float, j: int) -> np.ndarray:
        key = tuple(sorted((self._okey(o1), self._okey(o2)))) + (round(z, 13), j)
        out = self._vectors.get(key)
        if out is None:
            out = _contraction_vector(self.pair(o1, o2), z, j, self.k_dim)
            self._vectors[key] = out
        return out

    def _ang(self, o1, o2, tau: int, nu: int, j: int) -> float:
        key = (self._okey(o1), self._okey(o2), tau, nu, j)
        out = self._angular.get(key)
        if out is None:
            out = angular_integral(o1.angular, o2.angular, tau, nu, j)
            self._angular[key] = out
        return out

    # -- multipole shells ---------------------------------------------------

    def shells(self, spec: CoulombSpec) -> Tuple[int, List[float]]:
        """Per-tau contributions (nu, [shell_nu, ..., shell_tau_max])."""
        a, b, c, d = spec.orbitals
        sel = phi_selection(a.m, b.m, c.m, d.m)
        if sel is None:
            return 0, []
        nu, weight = sel
        eps_nu = 1.0 if nu == 0 else 2.0
        R = a.R
        prefactor = (4.0 / R) * (R / 2.0) ** 6 * (-1.0) ** nu * eps_nu * weight

        pair1 = self.pair(a, b)
        pair2 = self.pair(c, d)
        z = 0.5 * (pair1.scale + pair2.scale)
        u = {j: self._vector(a, b, z, j) for j in (0, 2)}
        v = {j: self._vector(c, d, z, j) for j in (0, 2)}

        shells = []
        for tau in range(nu, spec.tau_max + 1):
            ok1 = _parity_allows(a.angular, b.angular, tau, nu)
            ok2 = _parity_allows(c.angular, d.angular, tau, nu)
            if not (ok1 and ok2):
                shells.append(0.0)
                continue
            a1 = {j: self._ang(a, b, tau, nu, j) for j in (0, 2)}
            a2 = {j: self._ang(c, d, tau, nu, j) for j in (0, 2)}
            B = self.kernel.eval_B(nu, tau, z)
            n_factor = math.factorial(tau - nu) / math.factorial(tau + nu)

            def rad(j, jt):
                uu, vv = u[j], v[jt]
                return float(uu @ B[: len(uu), : len(vv)] @ vv) / (z * z)

            bracket = (
                a1[0] * a2[0] * rad(2, 2)
                - a1[0] * a2[2] * rad(2, 0)
                - a1[2] * a2[0] * rad(0, 2)
                + a1[2] * a2[2] * rad(0, 0)
            )
            shells.append(
                prefactor * (tau + 0.5) * n_factor * bracket
            )
        return nu, shells

    def integral(self, a, b, c, d, tau_max: Optional[int] = None) -> float:
        spec = CoulombSpec(a, b, c, d, tau_max or self.tau_max)
        return coulomb_integral(spec, self)


def coulomb_integral(spec: CoulombSpec, tables=None) -> float:
    """Full two-electron integral <bra1 ket1 | bra2 ket2>.

    ``tables`` may be a CoulombEngine (reused caches), a KernelTableSet, or
    None (kernel matrices assembled on demand).  Warns when the last
    multipole shell exceeds 1e-9 of the running total.
    """
    engine = _as_engine(tables, spec.tau_max)
    nu, shells = engine.shells(spec)
    if not shells:
        return 0.0
    total = float(np.sum(shells))
    contributing = [s for s in shells if s != 0.0]
    if contributing and abs(contributing[-1]) > 1e-9 * max(abs(total), 1e-300):
        trace = ", ".join(f"tau={nu + i}: {s:+.3e}" for i, s in enumerate(shells))
        warnings.warn(
            f"multipole sum not converged at tau_max={spec.tau_max}: last "
            f"shell {contributing[-1]:.3e} vs total {total:.6e} ({trace})",
            ConvergenceWarning,
            stacklevel=2,
        )
    return total


def _as_engine(tables, tau_max: int) -> CoulombEngine:
    if isinstance(tables, CoulombEngine):
        if tables.tau_max < tau_max:
            tables.tau_max = tau_max
            if isinstance(tables.kernel, _DirectKernel):
                tables.kernel.tau_max = tau_max
                tables.kernel._columns.clear()
        return tables
    return CoulombEngine(tables, tau_max=tau_max)


def tau_convergence_report(spec: CoulombSpec, tau_list: Sequence[int],
                           tables=None) -> List[dict]:
    """Relative truncation error of partial multipole sums.

    Computes the integral once up to max(tau_list) and reports, for each
    requested tau_max, the partial sum and its relative deviation from the
    reference.  Parity-skipped shells contribute exactly zero, producing
    plateaus in homonuclear systems.
    """
    tau_ref = max(tau_list)
    ref_spec = CoulombSpec(*spec.orbitals, tau_max=tau_ref)
    engine = _as_engine(tables, tau_ref)
    nu, shells = engine.shells(ref_spec)
    if not shells:
        return [
            {"tau_max": t, "value": 0.0, "rel_dev": 0.0, "shell": 0.0}
            for t in tau_list
        ]
    reference = float(np.sum(shells))
    out = []
    for t in tau_list:
        if t < nu:
            partial, shell = 0.0, 0.0
        else:
            partial = float(np.sum(shells[: t - nu + 1]))
            shell = shells[t - nu]
        out.append(
            {
                "tau_max": t,
                "value": partial,
                "shell": shell,
                "rel_dev": abs(partial - reference) / max(abs(reference), 1e-300),
            }
        )
    return out
