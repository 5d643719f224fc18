"""Star-resolvent solver for scalar Caputo problems.

For ``D^alpha y = f(t) y + g(t)`` on ``[0, T]`` with ``y(0) = y0``, the Volterra
form ``y = y0 + I^alpha[f y + g]`` becomes, in Legendre coefficients,

    c = y0 b + Ha F_delta c + Ha g_c,

where ``b`` holds the coefficients of the constant one, ``Ha = H**alpha`` and
``F_delta``, ``g_c`` are the multiplication matrix of ``f`` and the
coefficients of ``g``.  This is the resolvent ``(I - Ha F_delta)^{-1}`` applied
to the exact image of the initial datum, so no truncated ``H phi_m(0)``
enters the right-hand side.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.linalg as sla
from scipy.ndimage import median_filter

from .errors import DomainError, InvalidArgumentError, SolverError
from .legendre import Basis, eval_basis, expand_function, make_basis
from .star import mult_operator_matrix, theta_power

__all__ = [
    "ScalarProblem",
    "SpectralSolution",
    "CutoffPolicy",
    "solve_scalar",
    "select_cutoff",
    "evaluate_solution",
    "resolvent_solve",
]

logger = logging.getLogger(__name__)

Coefficient = Union[float, complex, Callable]
CutoffPolicy = Union[str, int]

PLATEAU_WINDOW = 11
PLATEAU_FACTOR = 3.0


@dataclass(frozen=True)
class ScalarProblem:
    """``D^alpha y = f(t) y + g(t)``, ``y(0) = y0`` on ``[0, T]``.

    ``f`` and ``g`` are constants or callables; ``g=None`` means homogeneous.
    ``expansion_tol`` controls the node-doubling expansion of callables;
    forcings with endpoint singularities need a looser value.
    """

    alpha: float
    f: Coefficient
    y0: float | complex = 1.0
    T: float = 1.0
    g: Coefficient | None = None
    expansion_tol: float = 1e-13

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidArgumentError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.T > 0:
            raise InvalidArgumentError(f"T must be positive, got {self.T}")


@dataclass
class SpectralSolution:
    """Coefficient vector of a solution and the number of retained terms.

    Entries at index ``cutoff`` and beyond are kept for diagnostics only;
    :meth:`__call__` ignores them.
    """

    basis: Basis
    coeffs: np.ndarray
    cutoff: int
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cutoff = int(min(max(self.cutoff, 1), self.basis.m))

    @property
    def stale(self) -> np.ndarray:
        """Mask of coefficients excluded from evaluation."""
        return np.arange(self.basis.m) >= self.cutoff

    def __call__(self, t):
        return evaluate_solution(self, t)


def select_cutoff(coeffs, policy: CutoffPolicy = "auto") -> int:
    """Number of leading coefficients to keep.

    ``policy`` is ``"auto"`` or an integer (``"fixed"`` semantics, clamped to
    ``[1, m]``).

    The automatic rule smooths ``|coeffs|`` with a moving median of width 11
    and locates its global minimum ``mu``.  The cutoff is the first index where
    the smoothed magnitude is within ``3 mu``, i.e. where the decay has reached
    the noise floor.  If that index lies inside the last window the decay is
    still under way at the end of the vector and every coefficient is kept.
    Vectors too short to hold two windows fall back to ``ceil(0.7 m)``.
    """
    c = np.abs(np.asarray(coeffs))
    m = c.size
    if m == 0:
        raise InvalidArgumentError("empty coefficient vector")
    if not isinstance(policy, str):
        return int(min(max(int(policy), 1), m))
    if policy != "auto":
        raise InvalidArgumentError(f"unknown cutoff policy {policy!r}")
    if m < 2 * PLATEAU_WINDOW:
        return math.ceil(0.7 * m)
    med = median_filter(c, size=PLATEAU_WINDOW, mode="nearest")
    floor = med.min()
    start = int(np.argmax(med <= PLATEAU_FACTOR * floor))
    if m - start < PLATEAU_WINDOW:
        return m
    return max(start, 1)


def evaluate_solution(s: SpectralSolution, t):
    """``sum_{j < cutoff} coeffs_j P_j(t)``."""
    phi = eval_basis(s.basis, t)
    k = s.cutoff
    return phi[..., :k] @ s.coeffs[:k]


def resolvent_solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Dense LU solve of ``A x = rhs`` with a conditioning check."""
    try:
        with warnings.catch_warnings():
            # exact singularity is reported below through rcond
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(A, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise SolverError(f"LU factorization failed: {exc}") from exc
    anorm = np.linalg.norm(A, 1)
    rcond = sla.lapack.get_lapack_funcs("gecon", (lu,))(lu, anorm, norm="1")[0]
    if not rcond > 10 * np.finfo(float).eps:
        raise SolverError(f"resolvent matrix is numerically singular (rcond={rcond:.3e})", 1.0 / max(rcond, 1e-300))
    return sla.lu_solve((lu, piv), rhs)


def _mult_matrix(basis: Basis, f: Coefficient, tol: float) -> np.ndarray:
    if callable(f):
        return mult_operator_matrix(basis, expand_function(basis, f, tol=tol)).entries
    return complex(f) * np.eye(basis.m) if np.iscomplexobj(f) else float(f) * np.eye(basis.m)


def _forcing_coeffs(basis: Basis, g: Coefficient, tol: float) -> np.ndarray:
    if callable(g):
        return expand_function(basis, g, tol=tol).beta
    return basis.constant_coeffs(g)


def solve_scalar(p: ScalarProblem, m: int, cutoff: CutoffPolicy = "auto") -> SpectralSolution:
    """Solve ``p`` with ``m`` Legendre coefficients.

    Returns
    -------
    SpectralSolution
        ``info`` records the auto/fixed policy and the matrix ``Ha`` is not
        stored (it is memoized by :func:`theta_power`).

    Raises
    ------
    SolverError
        If ``I - Ha F_delta`` is numerically singular.
    """
    if m < 8:
        raise InvalidArgumentError(f"m must be at least 8, got {m}")
    basis = make_basis(p.T, m)
    Ha = theta_power(basis, p.alpha).entries
    Fd = _mult_matrix(basis, p.f, p.expansion_tol)
    rhs = basis.constant_coeffs(p.y0)
    if p.g is not None:
        rhs = rhs + Ha @ _forcing_coeffs(basis, p.g, p.expansion_tol)
    A = np.eye(m) - Ha @ Fd
    c = resolvent_solve(A, rhs)
    k = select_cutoff(c, cutoff)
    logger.debug("scalar solve: m=%d cutoff=%d policy=%s", m, k, cutoff)
    return SpectralSolution(basis, c, k, info={"policy": cutoff})
