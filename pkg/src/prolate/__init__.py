"""Exact two-center diatomic orbitals and quadrature-free two-electron integrals.

Single-electron states of a diatomic molecule separate exactly in prolate
spheroidal coordinates; this package solves them to machine precision,
evaluates two-electron Coulomb/exchange integrals over them through the
Neumann expansion with tabulated radial kernel matrices (no numerical
quadrature on the production path), and layers a small configuration-
interaction solver on top for potential-energy curves.
"""

__version__ = "1.0.0"
