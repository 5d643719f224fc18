"""Coefficient matrices of the star-product calculus.

In the orthonormal Legendre basis, the Heaviside kernel ``Theta(t - s)`` maps
to the matrix ``H`` of the integration operator, its fractional star-powers map
to principal matrix powers ``H**alpha``, and multiplication by a function
``f(t)`` maps to a symmetric matrix ``F_delta`` built from triple products.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import scipy.linalg as sla
from scipy.special import binom

from .errors import AccuracyError, BranchError, InvalidArgumentError
from .legendre import Basis, ExpansionCoeffs, TripleTensor, expand_function, triple_products

__all__ = [
    "CoeffMatrix",
    "FracPowerConfig",
    "theta_matrix",
    "frac_power",
    "mult_operator_matrix",
    "star_coeff_matrix",
    "theta_power",
]

logger = logging.getLogger(__name__)

_IMAG_TOL = 1e-11
_BRANCH_TOL = 1e-12


@dataclass(frozen=True)
class CoeffMatrix:
    """Dense ``m x m`` coefficient matrix expressed in ``basis``."""

    entries: np.ndarray
    basis: Basis

    def __post_init__(self):
        a = np.array(self.entries)
        if a.shape != (self.basis.m, self.basis.m):
            raise InvalidArgumentError(f"matrix shape {a.shape} does not match basis size {self.basis.m}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, CoeffMatrix):
            _check_same_basis(self.basis, other.basis)
            return CoeffMatrix(self.entries @ other.entries, self.basis)
        return self.entries @ other


@dataclass(frozen=True)
class FracPowerConfig:
    """Options for :func:`frac_power`.

    Attributes
    ----------
    route : {"schur", "series"}
    rho : float, optional
        Shift of the binomial series; defaults to ``4 * ||H||_F``.
    series_max : int
        Largest binomial-series index.  The series converges at the rate of the
        spectral radius of ``H/rho - I``, which sits close to one for ``H``, so
        tens of thousands of terms are typical.
    """

    route: Literal["schur", "series"] = "schur"
    rho: float | None = None
    series_max: int = 60000


def _check_same_basis(a: Basis, b: Basis):
    if a != b:
        raise InvalidArgumentError(f"basis mismatch: {a} vs {b}")


def theta_matrix(basis: Basis) -> CoeffMatrix:
    """Coefficient matrix ``H`` of ``Theta(t - s)``.

    Follows from ``int P_l = (P_{l+1} - P_{l-1}) / (2l + 1)``: ``H`` is
    ``T/2`` times the rank-one ``e0 e0^T`` plus an antisymmetric tridiagonal
    part with subdiagonal ``1 / sqrt((2l+1)(2l+3))``.
    """
    m = basis.m
    A = np.zeros((m, m))
    A[0, 0] = 1.0
    l = np.arange(m - 1)
    g = 1.0 / np.sqrt((2 * l + 1.0) * (2 * l + 3.0))
    A[l + 1, l] = g
    A[l, l + 1] = -g
    return CoeffMatrix(0.5 * basis.T * A, basis)


def _series_power(H: np.ndarray, alpha: float, rho: float, series_max: int) -> np.ndarray:
    m = H.shape[0]
    A = H / rho - np.eye(m)
    radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    if radius >= 1.0:
        raise AccuracyError(f"binomial series diverges: spectral radius of H/rho - I is {radius:.6f}")
    S = np.eye(m, dtype=A.dtype)
    P = np.eye(m, dtype=A.dtype)
    coef = 1.0
    for j in range(1, series_max + 1):
        coef *= (alpha - j + 1) / j
        P = P @ A
        term = coef * P
        S += term
        if coef == 0.0 or np.linalg.norm(term) < 1e-15 * np.linalg.norm(S):
            return rho**alpha * S
    raise AccuracyError(
        f"binomial series not converged after {series_max} terms (spectral radius {radius:.6f})",
        estimate=float(np.linalg.norm(term) / np.linalg.norm(S)),
    )


def _schur_power(H: np.ndarray, alpha: float) -> np.ndarray:
    S, U = sla.schur(H.astype(complex), output="complex")
    ev = np.diag(S)
    scale = max(1.0, float(np.max(np.abs(ev))))
    on_cut = (np.abs(ev.imag) <= _BRANCH_TOL * scale) & (ev.real <= _BRANCH_TOL * scale)
    if np.any(on_cut):
        raise BranchError("eigenvalue on or near the closed negative real axis; principal power undefined")
    # scipy detects the triangular input and applies its Schur-Pade power
    R = sla.fractional_matrix_power(S, alpha)
    return U @ R @ U.conj().T


def frac_power(H, alpha: float, cfg: FracPowerConfig | None = None):
    """Principal matrix power ``H**alpha``.

    Parameters
    ----------
    H : CoeffMatrix or ndarray
    alpha : float
        Exponent in ``[0, 2]``.
    cfg : FracPowerConfig, optional

    Returns
    -------
    CoeffMatrix or ndarray
        Same kind as ``H``.  Real inputs give real outputs once the imaginary
        residue of the complex Schur route is confirmed to be roundoff.
    """
    cfg = cfg or FracPowerConfig()
    basis = H.basis if isinstance(H, CoeffMatrix) else None
    A = np.asarray(H.entries if basis is not None else H)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError("square matrix required")
    if not (0.0 <= alpha <= 2.0):
        raise InvalidArgumentError(f"alpha must lie in [0, 2], got {alpha}")
    if alpha == 0.0:
        R = np.eye(A.shape[0], dtype=A.dtype)
    elif alpha == 1.0:
        R = A.copy()
    elif alpha == 2.0:
        R = A @ A
    elif cfg.route == "schur":
        R = _schur_power(A, alpha)
    elif cfg.route == "series":
        rho = cfg.rho if cfg.rho is not None else 4.0 * float(np.linalg.norm(A))
        if rho <= 0:
            raise InvalidArgumentError("rho must be positive")
        R = _series_power(A.astype(complex) if np.iscomplexobj(A) else A, alpha, rho, cfg.series_max)
    else:
        raise InvalidArgumentError(f"unknown route {cfg.route!r}")
    if np.isrealobj(A) and np.iscomplexobj(R):
        resid = float(np.max(np.abs(R.imag))) if R.size else 0.0
        if resid > _IMAG_TOL * float(np.linalg.norm(R)):
            raise BranchError(f"imaginary residue {resid:.3e} too large for a real matrix power")
        R = R.real.copy()
    return CoeffMatrix(R, basis) if basis is not None else R


@functools.lru_cache(maxsize=16)
def _theta_power_cached(T: float, m: int, alpha: float) -> np.ndarray:
    R = frac_power(theta_matrix(Basis(T, m)), alpha).entries
    return R


def theta_power(basis: Basis, alpha: float) -> CoeffMatrix:
    """``H**alpha`` for ``basis`` by the Schur route, memoized per ``(T, m, alpha)``."""
    return CoeffMatrix(_theta_power_cached(basis.T, basis.m, float(alpha)), basis)


def mult_operator_matrix(basis: Basis, beta, triples: TripleTensor | None = None) -> CoeffMatrix:
    """Coefficient matrix ``F_delta`` of ``f(t) delta(t - s)``.

    ``(F_delta)_{kl} = sum_j beta_j F_{jkl}``.  ``beta`` may be an
    :class:`ExpansionCoeffs` or a plain coefficient vector.
    """
    if isinstance(beta, ExpansionCoeffs):
        _check_same_basis(basis, beta.basis)
        beta = beta.beta
    if triples is None:
        triples = triple_products(basis)
    _check_same_basis(basis, triples.basis)
    F = triples.contract(np.asarray(beta))
    return CoeffMatrix(0.5 * (F + F.T), basis)


def star_coeff_matrix(basis: Basis, f, alpha: float, tol: float = 1e-13) -> CoeffMatrix:
    """Coefficient matrix of ``f(t) Theta^{*alpha}(t, s)``, i.e. ``F_delta H**alpha``.

    ``f`` may be a scalar constant or a callable.
    """
    Ha = theta_power(basis, alpha).entries
    if callable(f):
        Fd = mult_operator_matrix(basis, expand_function(basis, f, tol=tol)).entries
        return CoeffMatrix(Fd @ Ha, basis)
    return CoeffMatrix(float(f) * Ha if np.isrealobj(f) else complex(f) * Ha, basis)
