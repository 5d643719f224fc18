"""Orthonormal shifted Legendre polynomials on ``[0, T]``.

The basis is a descriptor ``(T, m)``; polynomial values are always produced by
the three-term recurrence, never from stored tables.  Gauss-Legendre rules are
computed by Newton iteration on the same recurrence.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AccuracyError, DomainError, InvalidArgumentError, ResourceError

__all__ = [
    "Basis",
    "Quadrature",
    "ExpansionCoeffs",
    "TripleTensor",
    "gauss_legendre",
    "make_basis",
    "eval_basis",
    "expand_function",
    "triple_products",
]

_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class Basis:
    """Orthonormal shifted Legendre basis of size ``m`` on ``[0, T]``."""

    T: float
    m: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidArgumentError(f"horizon T must be positive, got {self.T!r}")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidArgumentError(f"basis size m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "m", int(self.m))

    def __call__(self, t):
        return eval_basis(self, t)

    def constant_coeffs(self, value=1.0) -> np.ndarray:
        """Exact coefficients of the constant function ``value``."""
        c = np.zeros(self.m, dtype=np.result_type(value, float))
        c[0] = value * math.sqrt(self.T)
        return c


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre rule on ``[a, b]``."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size

    def integrate(self, values) -> np.ndarray:
        """Apply the rule along the first axis of ``values``."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


@dataclass(frozen=True)
class ExpansionCoeffs:
    """Legendre coefficients ``beta`` plus an estimate of the neglected tail."""

    beta: np.ndarray
    residual: float
    basis: Basis
    nodes_used: int = 0


@functools.lru_cache(maxsize=32)
def _gauss_legendre_ref(n: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes on [-1, 1]; only the nonnegative half is iterated
    half = (n + 1) // 2
    i = np.arange(1, half + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for k in range(1, n):
            p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    if n % 2:
        x[-1] = 0.0
        nodes = np.concatenate([-x, x[-2::-1]])
        weights = np.concatenate([w, w[-2::-1]])
    else:
        nodes = np.concatenate([-x, x[::-1]])
        weights = np.concatenate([w, w[::-1]])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> Quadrature:
    """``n``-point Gauss-Legendre rule on ``[a, b]``, exact to degree ``2n-1``."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"node count must be a positive integer, got {n!r}")
    if n == 1:
        x, w = np.array([0.0]), np.array([2.0])
    else:
        x, w = _gauss_legendre_ref(int(n))
    half = 0.5 * (b - a)
    return Quadrature(nodes=a + half * (x + 1.0), weights=half * w)


def make_basis(T: float, m: int) -> Basis:
    """Construct the size-``m`` orthonormal basis on ``[0, T]``."""
    return Basis(T, m)


def _eval_unchecked(basis: Basis, t: np.ndarray) -> np.ndarray:
    m, T = basis.m, basis.T
    x = 2.0 * t / T - 1.0
    P = np.empty(t.shape + (m,))
    P[..., 0] = 1.0
    if m > 1:
        P[..., 1] = x
    for k in range(1, m - 1):
        P[..., k + 1] = ((2 * k + 1) * x * P[..., k] - k * P[..., k - 1]) / (k + 1)
    P *= np.sqrt((2.0 * np.arange(m) + 1.0) / T)
    return P


def eval_basis(basis: Basis, t) -> np.ndarray:
    """Basis vector ``phi_m(t)``.

    Parameters
    ----------
    basis : Basis
    t : float or array_like
        Times in ``[0, T]``.

    Returns
    -------
    ndarray
        Shape ``(m,)`` for scalar ``t``, otherwise ``t.shape + (m,)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < -_DOMAIN_SLACK * basis.T) or np.any(
        t > basis.T * (1 + _DOMAIN_SLACK)
    ):
        raise DomainError(f"time outside [0, {basis.T}]")
    return _eval_unchecked(basis, np.clip(t, 0.0, basis.T))


def _call_vectorized(f: Callable, t: np.ndarray) -> np.ndarray:
    try:
        v = np.asarray(f(t))
    except (TypeError, ValueError):
        v = None
    if v is None or v.shape != t.shape:
        v = np.array([f(float(s)) for s in t])
    return v


def expand_function(basis: Basis, f: Callable, tol: float = 1e-13, max_nodes: int = 2**14) -> ExpansionCoeffs:
    """Legendre coefficients ``beta_j = int_0^T f P_j``.

    The Gauss-Legendre node count is doubled until two successive coefficient
    sets agree to ``tol`` (relative to ``max(1, max|beta|)``).

    Raises
    ------
    AccuracyError
        If ``max_nodes`` is reached first; ``estimate`` carries the last change.
    """
    n = max(16, basis.m + 1)
    prev = None
    change = np.inf
    while True:
        q = gauss_legendre(n, 0.0, basis.T)
        fv = _call_vectorized(f, q.nodes)
        if not np.all(np.isfinite(fv)):
            raise InvalidArgumentError("function is not finite on [0, T]")
        beta = q.integrate(fv[:, None] * _eval_unchecked(basis, q.nodes))
        if prev is not None:
            change = float(np.max(np.abs(beta - prev)))
            if change <= tol * max(1.0, float(np.max(np.abs(beta)))):
                return ExpansionCoeffs(beta=beta, residual=change, basis=basis, nodes_used=n)
        if 2 * n > max_nodes:
            raise AccuracyError(
                f"expansion did not converge with {n} nodes (last change {change:.3e})", estimate=change
            )
        prev = beta
        n *= 2


class TripleTensor:
    """Triple products ``F_jkl = int_0^T P_j P_k P_l``.

    Stored in factored form (a quadrature rule exact to degree ``3(m-1)`` and
    the basis values at its nodes), which is permutation symmetric up to
    rounding and costs ``O(m^2)`` memory.  ``values`` materializes the dense
    ``m x m x m`` array when it fits the memory guard.
    """

    MAX_DENSE_BYTES = 256 * 2**20

    def __init__(self, basis: Basis):
        self.basis = basis
        n = max(1, math.ceil((3 * (basis.m - 1) + 1) / 2))
        self.quadrature = gauss_legendre(n, 0.0, basis.T)
        self._phi = _eval_unchecked(basis, self.quadrature.nodes)

    def __getitem__(self, jkl) -> float:
        j, k, l = jkl
        P = self._phi
        return float(self.quadrature.weights @ (P[:, j] * P[:, k] * P[:, l]))

    @property
    def values(self) -> np.ndarray:
        m = self.basis.m
        if 8 * m**3 > self.MAX_DENSE_BYTES:
            raise ResourceError(f"dense triple tensor for m={m} exceeds {self.MAX_DENSE_BYTES} bytes")
        P = self._phi
        return np.einsum("q,qj,qk,ql->jkl", self.quadrature.weights, P, P, P, optimize=True)

    def contract(self, beta) -> np.ndarray:
        """Return ``sum_j beta_j F_jkl`` as an ``m x m`` matrix."""
        beta = np.asarray(beta)
        if beta.shape != (self.basis.m,):
            raise InvalidArgumentError(f"expected {self.basis.m} coefficients, got shape {beta.shape}")
        P = self._phi
        fq = self.quadrature.weights * (P @ beta)
        return (P * fq[:, None]).T @ P


def triple_products(basis: Basis) -> TripleTensor:
    """Triple-product tensor of ``basis`` (exact quadrature of degree ``3(m-1)``)."""
    return TripleTensor(basis)
