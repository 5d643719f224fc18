"""Legendre-basis star-product solvers for linear Caputo fractional ODEs."""

from .errors import (
    AccuracyError,
    AccuracyGuardError,
    BranchError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InvalidArgumentError,
    ResourceError,
    SolverError,
    StarfodeError,
)
from .legendre import Basis, eval_basis, expand_function, gauss_legendre, make_basis, triple_products
from .star import FracPowerConfig, frac_power, mult_operator_matrix, star_coeff_matrix, theta_matrix, theta_power
from .special import gen_mittag_leffler, mittag_leffler, oracle_linear_t, pathsum_U, pfq
from .scalar import ScalarProblem, SpectralSolution, select_cutoff, solve_scalar
from .system import (
    SystemProblem,
    SystemSolution,
    arnoldi_reduce,
    iterate_low_rank,
    solve_projected_autonomous,
    solve_system_dense,
    solve_system_direct,
)
from .abm import abm_solve
from .schrodinger import build_fd_schrodinger

__version__ = "0.1.0"
