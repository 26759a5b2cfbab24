"""Many-electron layer: Slater determinants, symmetry subspaces, CI energies.

Because the single-electron orbitals are exact eigenfunctions of the
one-body part H0 of the clamped-nuclei Hamiltonian

    H = sum_i (-Delta_i/2 - Za/r_ia - Zb/r_ib) + sum_{i<j} 1/r_ij + Za Zb/R,

H0 is diagonal in any determinant basis built from them: the one-body part
of a matrix element is the sum of occupied orbital energies, and all
off-diagonal structure comes from the electron-electron repulsion V_ee via
the Slater-Condon rules over two-electron Coulomb symbols (ab|cd).

Symmetry-subspace bases are constructed in three steps: enumerate all
determinants with the frozen core filled and the remaining electrons in the
active window that match the term's axial angular momentum Lambda = sum m,
spin projection S_z = S, and (homonuclear) parity; then project onto total
spin S with the S^2 operator, whose matrix is assembled from the spin-
raising ladder into the S_z + 1 determinant block.  The resulting spin-
adapted configuration basis is the "wavefunction" count reported by
``SymmetrySubspace.size`` (54 for the triplet-oxygen window).  The +/-
reflection character of Sigma terms is not imposed as a basis filter --
reflection commutes with H, so the Hamiltonian block-diagonalizes by itself
-- but the character of the lowest eigenvector can be measured with
``reflection_character``.

Energies over an internuclear-distance grid are interpolated with a cubic
spline whose minimum is located by bounded scalar minimization.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .coulomb import ConvergenceWarning, CoulombEngine
from .orbital import SpheroidalOrbital, solve_orbital

__all__ = [
    "CurveResult",
    "MoleculeSpec",
    "SlaterDeterminant",
    "SpinOrbital",
    "SymbolCache",
    "SymmetrySubspace",
    "TermSymbol",
    "dissociation_curve",
    "dissociation_energy",
    "enumerate_subspace",
    "load_molecule",
    "matrix_element",
    "parse_label",
    "parse_term",
    "reflection_character",
    "subspace_energy",
]

_ELL_LETTERS = "spdfghik"
_M_NAMES = {"sigma": 0, "pi": 1, "delta": 2, "phi": 3}


# ---------------------------------------------------------------------------
# labels and terms
# ---------------------------------------------------------------------------


def parse_label(label: str) -> Tuple[int, int, int]:
    """Parse an orbital label like '1dsigma' or '2ppi' to (n, ell, |m|).

    An optional trailing parity letter ('1dsigmag') is accepted and checked
    against the parity implied by ell.
    """
    m = re.fullmatch(r"(\d+)([a-z])(sigma|pi|delta|phi)([gu])?", label.strip())
    if not m:
        raise ValueError(f"cannot parse orbital label {label!r}")
    n = int(m.group(1))
    if m.group(2) not in _ELL_LETTERS:
        raise ValueError(f"unknown angular letter {m.group(2)!r} in {label!r}")
    ell = _ELL_LETTERS.index(m.group(2))
    mu = _M_NAMES[m.group(3)]
    if mu > ell:
        raise ValueError(f"label {label!r} has |m| = {mu} > ell = {ell}")
    if m.group(4):
        implied = "g" if ell % 2 == 0 else "u"
        if m.group(4) != implied:
            raise ValueError(
                f"label {label!r}: parity letter contradicts ell = {ell}"
            )
    return n, ell, mu


@dataclass(frozen=True)
class TermSymbol:
    """Molecular term ^(2S+1)Lambda_(g/u)^(+/-), e.g. '3Sigma_g-'."""

    multiplicity: int
    Lambda: int
    parity: Optional[str] = None      # 'g', 'u', or None (heteronuclear)
    reflection: Optional[str] = None  # '+', '-', or None

    @property
    def S(self) -> float:
        return (self.multiplicity - 1) / 2.0

    def __str__(self):
        lam = {0: "Sigma", 1: "Pi", 2: "Delta", 3: "Phi"}.get(
            self.Lambda, str(self.Lambda)
        )
        out = f"{self.multiplicity}{lam}"
        if self.parity:
            out += f"_{self.parity}"
        if self.reflection:
            out += self.reflection
        return out


def parse_term(term: str) -> TermSymbol:
    m = re.fullmatch(
        r"(\d+)(Sigma|Pi|Delta|Phi)(?:_?([gu]))?([+-])?", term.strip()
    )
    if not m:
        raise ValueError(f"cannot parse term symbol {term!r}")
    lam = {"Sigma": 0, "Pi": 1, "Delta": 2, "Phi": 3}[m.group(2)]
    refl = m.group(4)
    if refl and lam != 0:
        raise ValueError(f"term {term!r}: +/- applies only to Sigma terms")
    return TermSymbol(int(m.group(1)), lam, m.group(3), refl)


# ---------------------------------------------------------------------------
# determinants
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class SpinOrbital:
    """One spin-orbital (ell, m, n, spin); the field order is the canonical
    determinant ordering.  ``spin`` is +1 (up) or -1 (down)."""

    ell: int
    m: int
    n: int
    spin: int

    @property
    def spatial(self) -> Tuple[int, int, int]:
        return (self.n, self.ell, self.m)

    def label(self) -> str:
        letter = _ELL_LETTERS[self.ell]
        mname = {0: "sigma", 1: "pi", 2: "delta", 3: "phi"}[abs(self.m)]
        sgn = "-" if self.m < 0 else ""
        arrow = "up" if self.spin > 0 else "down"
        return f"{self.n}{letter}{sgn}{mname}:{arrow}"


@dataclass(frozen=True)
class SlaterDeterminant:
    """Antisymmetrized product of distinct spin-orbitals, canonically sorted."""

    orbitals: Tuple[SpinOrbital, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.orbitals))
        if len(set(ordered)) != len(ordered):
            raise ValueError("duplicate spin-orbital in determinant")
        object.__setattr__(self, "orbitals", ordered)

    @property
    def Lambda(self) -> int:
        return sum(o.m for o in self.orbitals)

    @property
    def Sz(self) -> float:
        return sum(o.spin for o in self.orbitals) / 2.0

    @property
    def parity(self) -> str:
        return "g" if sum(o.ell for o in self.orbitals) % 2 == 0 else "u"

    def __len__(self):
        return len(self.orbitals)

    def replace(self, old: SpinOrbital, new: SpinOrbital) -> Tuple["SlaterDeterminant", int]:
        """Determinant with ``old`` -> ``new`` and the reordering sign."""
        orbs = list(self.orbitals)
        i = orbs.index(old)
        orbs.pop(i)
        sign = -1 if i % 2 else 1
        new_sorted = sorted(orbs + [new])
        j = new_sorted.index(new)
        sign *= -1 if j % 2 else 1
        return SlaterDeterminant(tuple(new_sorted)), sign


def _excitation(d1: SlaterDeterminant, d2: SlaterDeterminant):
    """(degree, holes, particles, sign) connecting two determinants.

    Holes are occupied in d1 only, particles in d2 only, each in canonical
    order; sign is the parity of the permutation aligning the common core
    (sum of the holes' positions in d1 plus the particles' positions in d2).
    """
    s1, s2 = set(d1.orbitals), set(d2.orbitals)
    holes = sorted(s1 - s2)
    particles = sorted(s2 - s1)
    if len(holes) != len(particles):
        raise ValueError("determinants with different electron numbers")
    if len(holes) > 2:
        return len(holes), holes, particles, 0
    sign_exp = sum(d1.orbitals.index(h) for h in holes)
    sign_exp += sum(d2.orbitals.index(p) for p in particles)
    return len(holes), holes, particles, (-1) ** sign_exp


# ---------------------------------------------------------------------------
# Slater-Condon matrix elements
# ---------------------------------------------------------------------------


class SymbolCache:
    """Canonicalized cache of spatial Coulomb symbols (ab|cd).

    Exploits the real-valued symmetries (ab|cd) = (cd|ab) = (ba|dc) and the
    azimuthal mirror m -> -m on all four labels.  Multipole truncation
    warnings are tallied instead of emitted: the many-electron model is
    defined at a fixed tau_max, so slowly converging exchange symbols are an
    expected property of the model, reported in bulk via ``truncation_count``
    and ``worst_truncation``.
    """

    def __init__(self, orbitals: Dict[Tuple[int, int, int], SpheroidalOrbital],
                 engine: CoulombEngine, tau_max: int):
        self.orbitals = orbitals
        self.engine = engine
        self.tau_max = tau_max
        self._cache: Dict[tuple, float] = {}
        self.truncation_count = 0
        self.worst_truncation = 0.0

    @staticmethod
    def _canonical(quad):
        a, b, c, d = quad
        variants = []
        for (p, q, r, s) in ((a, b, c, d), (c, d, a, b), (b, a, d, c), (d, c, b, a)):
            variants.append((p, q, r, s))
            variants.append(tuple((n, ell, -m) for (n, ell, m) in (p, q, r, s)))
        return min(variants)

    def symbol(self, a, b, c, d) -> float:
        """(ab|cd) for spatial keys (n, ell, m)."""
        key = self._canonical((a, b, c, d))
        val = self._cache.get(key)
        if val is None:
            from .coulomb import CoulombSpec
            orbs = [self.orbitals[k] for k in key]
            _nu, shells = self.engine.shells(
                CoulombSpec(*orbs, tau_max=self.tau_max))
            val = float(np.sum(shells)) if shells else 0.0
            contributing = [s for s in shells if s != 0.0]
            if contributing and val != 0.0:
                tail = abs(contributing[-1] / val)
                if tail > 1e-9:
                    self.truncation_count += 1
                    self.worst_truncation = max(self.worst_truncation, tail)
            self._cache[key] = val
        return val


def _element(d1: SlaterDeterminant, d2: SlaterDeterminant,
             energies: Dict[Tuple[int, int, int], float],
             symbols: SymbolCache, repulsion: float) -> float:
    """<d1|H|d2> by the Slater-Condon rules (chemist-notation symbols)."""
    degree, holes, particles, sign = _excitation(d1, d2)
    if degree == 0:
        occ = d1.orbitals
        val = sum(energies[o.spatial] for o in occ) + repulsion
        for i, oi in enumerate(occ):
            for oj in occ[i + 1:]:
                val += symbols.symbol(oi.spatial, oi.spatial,
                                      oj.spatial, oj.spatial)
                if oi.spin == oj.spin:
                    val -= symbols.symbol(oi.spatial, oj.spatial,
                                          oj.spatial, oi.spatial)
        return val
    if degree == 1:
        (a,), (b,) = holes, particles
        if a.spin != b.spin:
            return 0.0
        val = 0.0
        for c in d1.orbitals:
            if c == a:
                continue
            val += symbols.symbol(a.spatial, b.spatial, c.spatial, c.spatial)
            if c.spin == a.spin:
                val -= symbols.symbol(a.spatial, c.spatial,
                                      c.spatial, b.spatial)
        return sign * val
    if degree == 2:
        a1, a2 = holes
        b1, b2 = particles
        val = 0.0
        if a1.spin == b1.spin and a2.spin == b2.spin:
            val += symbols.symbol(a1.spatial, b1.spatial,
                                  a2.spatial, b2.spatial)
        if a1.spin == b2.spin and a2.spin == b1.spin:
            val -= symbols.symbol(a1.spatial, b2.spatial,
                                  a2.spatial, b1.spatial)
        return sign * val
    return 0.0


def matrix_element(det_i: SlaterDeterminant, det_j: SlaterDeterminant,
                   orbitals: Dict[Tuple[int, int, int], SpheroidalOrbital],
                   tables=None, *, tau_max: int = 9) -> float:
    """<det_i|H|det_j> over solved orbitals keyed by (n, ell, m).

    Includes the one-body orbital energies and the nuclear repulsion
    Za Zb / R on the diagonal.  ``tables`` is a CoulombEngine, a
    KernelTableSet, or None (kernel matrices assembled on demand).
    """
    ref = next(iter(orbitals.values()))
    for o in orbitals.values():
        if o.R != ref.R or (o.Za, o.Zb) != (ref.Za, ref.Zb):
            raise ValueError("orbitals solved at differing geometries")
    engine = tables if isinstance(tables, CoulombEngine) else CoulombEngine(
        tables, tau_max=tau_max)
    symbols = SymbolCache(orbitals, engine, tau_max)
    energies = {key: orb.energy for key, orb in orbitals.items()}
    repulsion = ref.Za * ref.Zb / ref.R
    return _element(det_i, det_j, energies, symbols, repulsion)


# ---------------------------------------------------------------------------
# symmetry subspaces
# ---------------------------------------------------------------------------


@dataclass
class SymmetrySubspace:
    """Spin-adapted configuration basis of one molecular term.

    ``determinants`` spans the (Lambda, S_z = S, parity) block;
    ``spin_adapt`` maps it onto the ``size`` total-spin eigenstates
    (columns are orthonormal S^2 eigenvectors with eigenvalue S(S+1)).
    """

    term: TermSymbol
    frozen: Tuple[Tuple[int, int, int], ...]   # spatial (n, ell, m)
    active: Tuple[Tuple[int, int, int], ...]
    determinants: List[SlaterDeterminant]
    spin_adapt: np.ndarray

    @property
    def size(self) -> int:
        return self.spin_adapt.shape[1]

    def spatial_orbitals(self) -> List[Tuple[int, int, int]]:
        keys = set(self.frozen) | set(self.active)
        return sorted(keys)

    def __contains__(self, det: SlaterDeterminant) -> bool:
        return det in self.determinants


def _expand_labels(labels: Sequence[str]) -> List[Tuple[int, int, int]]:
    """Orbital labels to spatial keys, expanding pi/delta into +/-m."""
    out = []
    for lbl in labels:
        n, ell, mu = parse_label(lbl)
        if mu == 0:
            out.append((n, ell, 0))
        else:
            out.append((n, ell, +mu))
            out.append((n, ell, -mu))
    if len(set(out)) != len(out):
        raise ValueError("duplicate orbital label")
    return out


def _spin_orbitals(spatials) -> List[SpinOrbital]:
    return [SpinOrbital(ell, m, n, s)
            for (n, ell, m) in spatials for s in (+1, -1)]


def _block(frozen_so, active_so, n_active, Lambda, Sz2, parity):
    """All determinants of the (Lambda, 2 S_z, parity) block."""
    dets = []
    for combo in combinations(active_so, n_active):
        orbs = tuple(frozen_so) + combo
        lam = sum(o.m for o in orbs)
        if lam != Lambda:
            continue
        if sum(o.spin for o in orbs) != Sz2:
            continue
        if parity is not None:
            par = "g" if sum(o.ell for o in orbs) % 2 == 0 else "u"
            if par != parity:
                continue
        dets.append(SlaterDeterminant(orbs))
    dets.sort(key=lambda d: d.orbitals)
    return dets


def _raising_matrix(dets_lo: List[SlaterDeterminant],
                    dets_hi: List[SlaterDeterminant]) -> np.ndarray:
    """Matrix of the spin-raising operator S+ between determinant blocks."""
    index_hi = {d: i for i, d in enumerate(dets_hi)}
    A = np.zeros((len(dets_hi), len(dets_lo)))
    for j, det in enumerate(dets_lo):
        occ = set(det.orbitals)
        for o in det.orbitals:
            if o.spin != -1:
                continue
            flipped = SpinOrbital(o.ell, o.m, o.n, +1)
            if flipped in occ:
                continue
            new_det, sign = det.replace(o, flipped)
            i = index_hi.get(new_det)
            if i is not None:
                A[i, j] += sign
    return A


def enumerate_subspace(term, frozen: Sequence[str], active_window: Sequence[str],
                       N: int) -> SymmetrySubspace:
    """Spin-adapted basis of the term's symmetry subspace.

    ``frozen`` orbitals are doubly occupied in every configuration; the
    remaining electrons fill the ``active_window`` orbitals in all ways
    compatible with the term's Lambda (taken as +|Lambda|), S_z = S, and
    parity.  The determinant block is then projected onto total spin S by
    diagonalizing S^2 = S- S+ + S_z (S_z + 1), built from the spin-raising
    ladder into the S_z + 1 block.  Raises ValueError when no configuration
    matches.
    """
    if isinstance(term, str):
        term = parse_term(term)
    frozen_sp = _expand_labels(frozen)
    active_sp = _expand_labels(active_window)
    if set(frozen_sp) & set(active_sp):
        raise ValueError("frozen and active orbital sets overlap")
    frozen_so = _spin_orbitals(frozen_sp)
    active_so = _spin_orbitals(active_sp)
    n_active = N - len(frozen_so)
    if n_active < 0 or n_active > len(active_so):
        raise ValueError(
            f"{N} electrons cannot fill {len(frozen_so)} frozen and up to "
            f"{len(active_so)} active spin-orbitals"
        )
    sz2 = term.multiplicity - 1        # 2 S_z at the highest projection
    dets = _block(frozen_so, active_so, n_active, term.Lambda, sz2,
                  term.parity)
    if not dets:
        raise ValueError(f"no determinant matches term {term}")

    dets_hi = _block(frozen_so, active_so, n_active, term.Lambda, sz2 + 2,
                     term.parity)
    A = _raising_matrix(dets, dets_hi)
    s_z = sz2 / 2.0
    s2 = A.T @ A + s_z * (s_z + 1.0) * np.eye(len(dets))
    eigval, eigvec = np.linalg.eigh(s2)
    want = term.S * (term.S + 1.0)
    keep = np.abs(eigval - want) < 1e-8
    if not np.any(keep):
        raise ValueError(f"no total-spin S = {term.S} state in the block")
    U = eigvec[:, keep]
    return SymmetrySubspace(term, tuple(frozen_sp), tuple(active_sp),
                            dets, U)


def reflection_character(subspace: SymmetrySubspace,
                         vector: np.ndarray) -> float:
    """<v| sigma_v |v> of a spin-adapted-basis vector (m -> -m reflection).

    Meaningful for Lambda = 0 subspaces, where the reflection maps the
    determinant block onto itself; returns a value near +1 or -1 for states
    of pure Sigma+/Sigma- character.
    """
    dets = subspace.determinants
    index = {d: i for i, d in enumerate(dets)}
    n = len(dets)
    Rv = np.zeros((n, n))
    for j, det in enumerate(dets):
        mirrored = [SpinOrbital(o.ell, -o.m, o.n, o.spin) for o in det.orbitals]
        target = SlaterDeterminant(tuple(mirrored))
        i = index.get(target)
        if i is None:
            raise ValueError("reflection leaves the determinant block")
        Rv[i, j] = _permutation_sign(target.orbitals, tuple(mirrored))
    v_det = subspace.spin_adapt @ np.asarray(vector, dtype=float)
    return float(v_det @ Rv @ v_det) / float(v_det @ v_det)


def _permutation_sign(sorted_orbs, unsorted_orbs) -> int:
    """Sign of the permutation sorting ``unsorted_orbs`` (same multiset)."""
    idx = [sorted_orbs.index(o) for o in unsorted_orbs]
    sign = 1
    seen = [False] * len(idx)
    for i in range(len(idx)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = idx[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------


def _solve_all(spatials, Za, Zb, R) -> Dict[Tuple[int, int, int], SpheroidalOrbital]:
    out = {}
    for (n, ell, m) in spatials:
        try:
            out[(n, ell, m)] = solve_orbital(Za, Zb, R, n, ell, m)
        except Exception as exc:
            raise RuntimeError(
                f"orbital (n={n}, ell={ell}, m={m}) failed to solve at "
                f"Za={Za}, Zb={Zb}, R={R}: {exc}"
            ) from exc
    return out


def subspace_energy(subspace: SymmetrySubspace, R: float, Za: float, Zb: float,
                    tables=None, *, tau_max: int = 9, orbitals=None,
                    symbols=None) -> Tuple[float, np.ndarray]:
    """Ground energy and full spectrum of the subspace Hamiltonian at R.

    Solves all involved orbitals, assembles the determinant-block
    Hamiltonian by the Slater-Condon rules, restricts it to the spin-adapted
    basis, and diagonalizes.  Returns (E0, sorted eigenvalues).  Passing the
    ``symbols`` cache of a previous call at the same geometry (e.g. for a
    different term of the same molecule) reuses all Coulomb symbols.
    """
    if symbols is None:
        if orbitals is None:
            orbitals = _solve_all(subspace.spatial_orbitals(), Za, Zb, R)
        engine = tables if isinstance(tables, CoulombEngine) else CoulombEngine(
            tables, tau_max=tau_max)
        symbols = SymbolCache(orbitals, engine, tau_max)
    else:
        orbitals = symbols.orbitals
    energies = {key: orb.energy for key, orb in orbitals.items()}
    repulsion = Za * Zb / R

    dets = subspace.determinants
    n = len(dets)
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            val = _element(dets[i], dets[j], energies, symbols, repulsion)
            H[i, j] = H[j, i] = val
    U = subspace.spin_adapt
    H_csf = U.T @ H @ U
    spectrum = np.linalg.eigvalsh(0.5 * (H_csf + H_csf.T))
    return float(spectrum[0]), spectrum


# ---------------------------------------------------------------------------
# molecules and curves
# ---------------------------------------------------------------------------


@dataclass
class MoleculeSpec:
    """Electronic model of one diatomic: charges, electron count, window."""

    Za: float
    Zb: float
    N: int
    frozen: Tuple[str, ...]
    active: Tuple[str, ...]
    term: str

    def subspace(self, term: Optional[str] = None) -> SymmetrySubspace:
        return enumerate_subspace(term or self.term, self.frozen,
                                  self.active, self.N)


def load_molecule(source) -> MoleculeSpec:
    """MoleculeSpec from a JSON file path or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = dict(source)
    return MoleculeSpec(
        Za=data["Za"], Zb=data["Zb"], N=int(data["N"]),
        frozen=tuple(data["frozen"]), active=tuple(data["active"]),
        term=data["term"],
    )


@dataclass
class CurveResult:
    """Potential-energy curve samples with spline interpolant and minimum."""

    points: List[Tuple[float, float]]
    spline: CubicSpline
    R_min: float
    E_min: float
    at_boundary: bool
    failures: List[Tuple[float, str]] = field(default_factory=list)


def _minimize_spline(points) -> Tuple[float, float, bool]:
    rs = np.array([p[0] for p in points])
    es = np.array([p[1] for p in points])
    spline = CubicSpline(rs, es)
    res = minimize_scalar(spline, bounds=(rs[0], rs[-1]), method="bounded",
                          options={"xatol": 1e-10})
    r_min = float(res.x)
    span = rs[-1] - rs[0]
    at_boundary = (r_min - rs[0] < 1e-6 * span) or (rs[-1] - r_min < 1e-6 * span)
    return spline, r_min, float(spline(r_min)), at_boundary


def dissociation_curve(spec: MoleculeSpec, R_grid: Sequence[float],
                       term: Optional[str] = None, tables=None, *,
                       tau_max: int = 9, progress: Optional[Callable] = None,
                       on_error: str = "continue") -> CurveResult:
    """Scan R, interpolate with a cubic spline, locate the minimum.

    The subspace is enumerated once (it does not depend on R); each grid
    point solves its own orbitals and Coulomb symbols.  Failures at single
    grid points are recorded and skipped when ``on_error`` is "continue",
    re-raised otherwise.  A minimum on the grid boundary is flagged via
    ``at_boundary``.
    """
    subspace = spec.subspace(term)
    points: List[Tuple[float, float]] = []
    failures: List[Tuple[float, str]] = []
    for R in R_grid:
        try:
            e0, _spec = subspace_energy(subspace, float(R), spec.Za, spec.Zb,
                                        tables, tau_max=tau_max)
            points.append((float(R), e0))
            if progress:
                progress(f"R={R:g}: E0={e0:.6f}")
        except Exception as exc:
            if on_error != "continue":
                raise
            failures.append((float(R), str(exc)))
            if progress:
                progress(f"R={R:g}: failed ({exc})")
    if len(points) < 4:
        raise RuntimeError(
            f"only {len(points)} grid points succeeded; cannot fit a cubic "
            f"spline (failures: {failures})"
        )
    spline, r_min, e_min, at_boundary = _minimize_spline(points)
    return CurveResult(points, spline, r_min, e_min, at_boundary, failures)


def dissociation_energy(E_mol_min: float, E_atom_refs: Sequence[float]) -> float:
    """Dissociation energy: sum of atomic reference energies minus E_mol."""
    return float(np.sum(E_atom_refs) - E_mol_min)
