"""Fractional Adams-Bashforth-Moulton predictor-corrector.

Product-rectangle predictor and product-trapezoidal corrector on the Volterra
form ``u(t) = u0 + I^alpha[field(., u)](t)`` with the full history kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, ResourceError

__all__ = ["Trajectory", "abm_solve", "linear_field"]

MAX_STEPS = 10**7


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


def linear_field(M: Callable | np.ndarray, N: Callable | None = None) -> Callable:
    """``(t, u) -> M(t) u + N(t)``; ``M`` may be a constant matrix."""
    if callable(M):
        if N is None:
            return lambda t, u: M(t) @ u
        return lambda t, u: M(t) @ u + N(t)
    M = np.asarray(M)
    if N is None:
        return lambda t, u: M @ u
    return lambda t, u: M @ u + N(t)


def abm_solve(
    alpha: float,
    field: Callable,
    u0,
    T: float,
    dt: float,
    corrector_passes: int = 1,
    max_steps: int = MAX_STEPS,
) -> Trajectory:
    """Integrate ``D^alpha u = field(t, u)``, ``u(0) = u0``, on a uniform grid.

    Parameters
    ----------
    alpha : float
        Order in ``(0, 1]``.
    field : callable
        ``field(t, u)`` returning an array shaped like ``u0``.
    corrector_passes : int
        Number of corrector evaluations per step (1 gives PECE).

    Returns
    -------
    Trajectory
        ``values[0]`` is ``u0``; the grid has ``round(T / dt) + 1`` points.
    """
    if not (0.0 < alpha <= 1.0):
        raise InvalidArgumentError("alpha must lie in (0, 1]")
    if not (dt > 0 and T > 0):
        raise InvalidArgumentError("T and dt must be positive")
    N = int(round(T / dt))
    if N > max_steps:
        raise ResourceError(f"{N} steps exceed the guard of {max_steps}")
    N = max(N, 1)
    h = T / N
    u0 = np.atleast_1d(np.asarray(u0))
    dtype = np.result_type(u0, field(0.0, u0), float)
    U = np.empty((N + 1,) + u0.shape, dtype=dtype)
    Fh = np.empty_like(U)
    U[0] = u0
    Fh[0] = field(0.0, u0)
    j = np.arange(N + 2, dtype=float)
    ja = j**alpha
    ja1 = j ** (alpha + 1)
    bw = ja[1:] - ja[:-1]  # bw[i] weights f_{k-i} in the predictor
    aw = ja1[2:] - 2.0 * ja1[1:-1] + ja1[:-2]  # aw[i] weights f_{k-i}, i = 0..k-1
    c1 = h**alpha / gamma(alpha + 1.0)
    c2 = h**alpha / gamma(alpha + 2.0)
    for k in range(N):
        n1 = k + 1
        t1 = n1 * h
        pred = u0 + c1 * np.tensordot(bw[:n1][::-1], Fh[:n1], axes=1)
        hist = (k ** (alpha + 1) - (k - alpha) * n1**alpha) * Fh[0]
        if k:
            hist = hist + np.tensordot(aw[:k][::-1], Fh[1:n1], axes=1)
        u = pred
        for _ in range(corrector_passes):
            u = u0 + c2 * (hist + field(t1, u))
        U[n1] = u
        Fh[n1] = field(t1, u)
    return Trajectory(times=h * np.arange(N + 1), values=U)
