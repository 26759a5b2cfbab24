"""Radial kernel matrices for the two-electron Coulomb integrals.

This subpackage provides

* ``closed``  -- the closed-form integral catalogue (exponential cutoffs,
  nested t-integrals, inverse-linear, logarithmic, nested-arcoth and
  inverse-square-root integrals of Laguerre-type integrands),
* ``jets``    -- truncated Taylor-series arithmetic over extended-precision
  floats, used to differentiate every closed form analytically in z,
* ``ladders`` -- recurrence engines that evaluate whole families of the
  closed forms at once,
* ``assemble`` -- assembly of the radial kernel matrices B^nu_tau(z),
* ``tables``  -- Taylor tabulation of B^nu_tau on a half-integer z grid and
  the persistent on-disk cache.
"""

from .assemble import ColumnDiagnostics, assemble_B, assemble_column
from .closed import (int_exp_cutoff, t_matrix, int_inv_xz, int_log_over,
                     int_arcoth_nested, w_sequence, sqrt_expansion)
from .tables import (DEFAULT_K, DEFAULT_N_MAX, DEFAULT_Z_RANGE, ENV_CACHE_DIR,
                     GridRangeError, KernelTableSet, PrecisionBudgetError,
                     RadialKernelTable, TableIntegrityError, build_tables,
                     default_cache_dir, derivative_cross_check, eval_B,
                     load_tables)

__all__ = [
    "int_exp_cutoff", "t_matrix", "int_inv_xz", "int_log_over",
    "int_arcoth_nested", "w_sequence", "sqrt_expansion",
    "ColumnDiagnostics", "assemble_B", "assemble_column",
    "DEFAULT_K", "DEFAULT_N_MAX", "DEFAULT_Z_RANGE", "ENV_CACHE_DIR",
    "GridRangeError", "KernelTableSet", "PrecisionBudgetError",
    "RadialKernelTable", "TableIntegrityError", "build_tables",
    "default_cache_dir", "derivative_cross_check", "eval_B", "load_tables",
]
