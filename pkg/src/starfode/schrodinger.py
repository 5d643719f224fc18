"""Finite-difference semi-discretization of the time-fractional Schroedinger
equation on ``[-2, 2]^2`` with a square well and homogeneous Dirichlet data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError
from .system import SystemProblem

__all__ = ["SchrodingerAssembly", "build_fd_schrodinger", "laplacian_5pt"]

HALF_WIDTH = 2.0
WELL_HALF_WIDTH = 1.0
WELL_HEIGHT = 10.0
MODULATION = 0.05
MODULATION_FREQ = 5.0 * np.pi**2


@dataclass
class SchrodingerAssembly:
    """``psi^(alpha) = (K + f(t) L) psi`` on the interior grid nodes."""

    K: np.ndarray
    L: np.ndarray | None
    f: Callable | None
    u0: np.ndarray
    x: np.ndarray
    y: np.ndarray
    laplacian: np.ndarray
    potential: np.ndarray
    alpha: float

    def problem(self, T: float = 1.0) -> SystemProblem:
        return SystemProblem(self.alpha, self.K, self.u0, T, L=self.L, f=self.f)

    def M(self, t: float) -> np.ndarray:
        return self.K if self.L is None else self.K + self.f(t) * self.L


def laplacian_5pt(n: int, h: float) -> sp.csr_matrix:
    """5-point Laplacian on an ``n x n`` interior grid, Dirichlet rows eliminated."""
    D = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)) / h**2
    I = sp.identity(n)
    return (sp.kron(D, I) + sp.kron(I, D)).tocsr()


def build_fd_schrodinger(grid_n: int, alpha: float, time_dependent: bool = False) -> SchrodingerAssembly:
    """Assemble ``K = i^{-alpha} (Delta_h / 2 - V1 - c I)`` and ``L``.

    ``c = 1/2`` and ``L = -0.05 i^{-alpha} I`` with ``f(t) = sin(5 pi^2 t)`` in
    the time-dependent case; ``c = 0`` and ``L = None`` otherwise.  Nodes are
    ordered with ``x`` varying slowest.
    """
    if int(grid_n) != grid_n or grid_n < 5:
        raise InvalidArgumentError(f"grid_n must be an integer >= 5, got {grid_n}")
    if not (0.0 < alpha <= 1.0):
        raise InvalidArgumentError("alpha must lie in (0, 1]")
    n = int(grid_n)
    h = 2.0 * HALF_WIDTH / (n + 1)
    axis = -HALF_WIDTH + h * np.arange(1, n + 1)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    x, y = X.ravel(), Y.ravel()
    inside = (np.abs(x) < WELL_HALF_WIDTH) & (np.abs(y) < WELL_HALF_WIDTH)
    V = np.where(inside, 0.0, WELL_HEIGHT)
    lap = laplacian_5pt(n, h).toarray()
    phase = np.exp(-0.5j * np.pi * alpha)
    offset = 0.5 if time_dependent else 0.0
    K = phase * (0.5 * lap - np.diag(V + offset))
    L = f = None
    if time_dependent:
        L = -MODULATION * phase * np.eye(n * n)
        f = lambda t: np.sin(MODULATION_FREQ * np.asarray(t))
    u0 = np.exp(-(x**2 + y**2) / 2.0).astype(complex)
    return SchrodingerAssembly(K=K, L=L, f=f, u0=u0, x=x, y=y, laplacian=lap, potential=V, alpha=alpha)
