"""Star-resolvent solvers for linear Caputo systems.

For ``D^alpha u = (K + f(t) L) u + N(t)``, ``u(0) = u0``, the coefficient matrix
``X`` (``m x n``, column ``i`` holding the Legendre coefficients of ``u_i``)
satisfies

    X - Ha X K^T - (Ha F_delta) X L^T = b u0^T + Ha N_c,

with ``Ha = H**alpha`` and ``b`` the coefficients of the constant one.  The
module offers a dense Kronecker solve, a Bartels-Stewart Stein solver for the
autonomous case, its Krylov projection, and a low-rank fixed-point iteration
for ``L != 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, InvalidArgumentError, ResourceError, SolverError
from .legendre import Basis, eval_basis, expand_function, make_basis
from .scalar import CutoffPolicy, SpectralSolution, resolvent_solve, select_cutoff
from .star import mult_operator_matrix, theta_power

__all__ = [
    "SystemProblem",
    "SystemSolution",
    "LowRankFactors",
    "KrylovReduction",
    "SteinSolver",
    "system_operators",
    "solve_system_dense",
    "solve_stein_autonomous",
    "solve_system_direct",
    "arnoldi_reduce",
    "solve_projected_autonomous",
    "iterate_low_rank",
    "evaluate_system",
    "matrix_equation_residual",
]

logger = logging.getLogger(__name__)

DENSE_MAX_DIM = 40000
COMPRESSION_TOL = 1e-10
DEFLATION_TOL = 1e-12
STEIN_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class SystemProblem:
    """``D^alpha u = (K + f(t) L) u + N(t)``, ``u(0) = u0`` on ``[0, T]``.

    ``f`` is a constant or callable, ``N`` an optional callable returning a
    length-``n`` vector.  ``L=None`` means autonomous.
    """

    alpha: float
    K: np.ndarray
    u0: np.ndarray
    T: float = 1.0
    L: np.ndarray | None = None
    f: float | Callable | None = None
    N: Callable | None = None
    expansion_tol: float = 1e-13

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K))
        u0 = np.atleast_1d(np.asarray(self.u0))
        n = u0.size
        if K.shape != (n, n):
            raise InvalidArgumentError(f"K has shape {K.shape}, expected {(n, n)}")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "u0", u0)
        if self.L is not None:
            L = np.atleast_2d(np.asarray(self.L))
            if L.shape != (n, n):
                raise InvalidArgumentError(f"L has shape {L.shape}, expected {(n, n)}")
            if self.f is None:
                raise InvalidArgumentError("modulation f required when L is given")
            object.__setattr__(self, "L", L)
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidArgumentError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.T > 0:
            raise InvalidArgumentError("T must be positive")

    @property
    def n(self) -> int:
        return self.u0.size

    @property
    def autonomous(self) -> bool:
        return self.L is None or not np.any(self.L)

    @property
    def is_complex(self) -> bool:
        parts = [self.K, self.u0] + ([self.L] if self.L is not None else [])
        return any(np.iscomplexobj(x) for x in parts) or np.iscomplexobj(self.f)


@dataclass
class LowRankFactors:
    """``X ~ left @ right.T`` with ``left`` ``m x s`` and ``right`` ``n x s``."""

    left: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return self.left.shape[1]

    def full(self) -> np.ndarray:
        return self.left @ self.right.T


@dataclass
class KrylovReduction:
    """Orthonormal block Krylov basis ``V`` and projection ``J = V^H A V``.

    ``AV`` is kept so residuals can be formed without new products with ``A``;
    ``widths`` lists the block widths after deflation.
    """

    V: np.ndarray
    J: np.ndarray
    AV: np.ndarray
    widths: list
    invariant: bool

    @property
    def block_width(self) -> int:
        return self.widths[0] if self.widths else 0


@dataclass
class SystemSolution:
    """Coefficients of all components; ``cutoffs[i]`` terms are used for ``u_i``."""

    basis: Basis
    X: np.ndarray | None = None
    factors: LowRankFactors | None = None
    cutoffs: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def coeffs(self) -> np.ndarray:
        return self.X if self.X is not None else self.factors.full()

    def components(self) -> list[SpectralSolution]:
        C = self.coeffs
        return [SpectralSolution(self.basis, C[:, i].copy(), int(self.cutoffs[i])) for i in range(C.shape[1])]

    def __call__(self, t):
        return evaluate_system(self, t)


def _finalize(basis: Basis, X=None, factors=None, cutoff: CutoffPolicy = "auto", info=None, real=False):
    C = X if X is not None else factors.full()
    if real and np.iscomplexobj(C):
        C = C.real
        if X is not None:
            X = C
        else:
            factors = LowRankFactors(factors.left.real, factors.right.real)
    cut = np.array([select_cutoff(C[:, i], cutoff) for i in range(C.shape[1])], dtype=int)
    return SystemSolution(basis, X=X, factors=factors, cutoffs=cut, info=info or {})


def _expand_vector(basis: Basis, N: Callable, n: int, tol: float) -> np.ndarray:
    cols = [expand_function(basis, lambda t, i=i: np.asarray(N(t))[i] if np.ndim(t) == 0 else np.array(
        [np.asarray(N(s))[i] for s in np.atleast_1d(t)]), tol=tol).beta for i in range(n)]
    return np.column_stack(cols)


def system_operators(p: SystemProblem, m: int):
    """Matrices of the discrete equation.

    Returns
    -------
    basis, Ha, HaF, b, rhs
        ``HaF`` is ``Ha @ F_delta`` or ``None`` when autonomous; ``rhs`` is the
        full ``m x n`` right-hand side ``b u0^T + Ha N_c``.
    """
    basis = make_basis(p.T, m)
    Ha = theta_power(basis, p.alpha).entries
    b = basis.constant_coeffs(1.0)
    HaF = None
    if not p.autonomous:
        if callable(p.f):
            Fd = mult_operator_matrix(basis, expand_function(basis, p.f, tol=p.expansion_tol)).entries
            HaF = Ha @ Fd
        else:
            HaF = p.f * Ha
    rhs = np.outer(b, p.u0)
    if p.N is not None:
        rhs = rhs + Ha @ _expand_vector(basis, p.N, p.n, p.expansion_tol)
    return basis, Ha, HaF, b, rhs


def matrix_equation_residual(p: SystemProblem, m: int, X) -> float:
    """Relative Frobenius residual of ``X`` in the discrete matrix equation."""
    _, Ha, HaF, _, rhs = system_operators(p, m)
    X = X.full() if isinstance(X, LowRankFactors) else np.asarray(X)
    R = X - Ha @ X @ p.K.T - rhs
    if HaF is not None:
        R = R - HaF @ X @ p.L.T
    return float(np.linalg.norm(R) / np.linalg.norm(rhs))


def solve_system_dense(
    p: SystemProblem, m: int, cutoff: CutoffPolicy = "auto", max_dim: int = DENSE_MAX_DIM
) -> SystemSolution:
    """Kronecker-form solve ``(I - K (x) Ha - L (x) HaF) vec X = vec rhs`` by dense LU."""
    n = p.n
    if n * m > max_dim:
        raise ResourceError(f"dense system of size {n * m} exceeds guard {max_dim}")
    basis, Ha, HaF, _, rhs = system_operators(p, m)
    A = np.eye(n * m) - np.kron(p.K, Ha)
    if HaF is not None:
        A = A - np.kron(p.L, HaF)
    x = resolvent_solve(A, rhs.reshape(-1, order="F"))
    X = x.reshape(m, n, order="F")
    return _finalize(basis, X=X, cutoff=cutoff, info={"solver": "dense"})


class SteinSolver:
    """Bartels-Stewart solver for ``X - A X M^T = C`` with ``A`` fixed.

    The complex Schur form of ``A`` is computed once and reused across calls,
    which is what the low-rank iteration needs.
    """

    def __init__(self, A: np.ndarray):
        A = np.asarray(A)
        self.real = np.isrealobj(A)
        self.S, self.U = sla.schur(A.astype(complex), output="complex")
        self._sdiag = np.diag(self.S)

    def solve(self, M: np.ndarray, C: np.ndarray) -> np.ndarray:
        """Solve for ``X`` given ``M`` (``n x n``) and ``C`` (``m x n``)."""
        M = np.atleast_2d(np.asarray(M))
        C = np.asarray(C)
        m, n = C.shape
        if M.shape != (n, n) or m != self.S.shape[0]:
            raise InvalidArgumentError("inconsistent shapes in Stein equation")
        if not np.any(M):
            return C.copy()
        R, W = sla.schur(M.T.astype(complex), output="complex")
        rdiag = np.diag(R)
        gap = np.abs(1.0 - np.outer(rdiag, self._sdiag))
        scale = 1.0 + np.abs(np.outer(rdiag, self._sdiag))
        if np.any(gap < STEIN_SINGULAR_TOL * scale):
            raise SolverError("Stein operator is singular: 1 is a product of eigenvalues of A and M")
        S = self.S
        Ch = self.U.conj().T @ C @ W
        Y = np.empty((m, n), dtype=complex)
        I = np.eye(m)
        for j in range(n):
            r = Ch[:, j]
            if j:
                r = r + S @ (Y[:, :j] @ R[:j, j])
            Y[:, j] = sla.solve_triangular(I - rdiag[j] * S, r, check_finite=False)
        X = self.U @ Y @ W.conj().T
        if self.real and np.isrealobj(M) and np.isrealobj(C):
            X = X.real
        return X


def solve_stein_autonomous(Ha, M, rhs_left, rhs_right) -> np.ndarray:
    """Solve ``X - Ha X M^T = rhs_left rhs_right^T`` (vectors or ``m x r``/``n x r`` blocks)."""
    left = np.asarray(rhs_left)
    right = np.asarray(rhs_right)
    C = np.outer(left, right) if left.ndim == 1 else left @ right.T
    return SteinSolver(Ha).solve(M, C)


def solve_system_direct(p: SystemProblem, m: int, cutoff: CutoffPolicy = "auto") -> SystemSolution:
    """Exact solve of the matrix equation without forming the Kronecker matrix.

    Handles autonomous problems and ``L = l I``, in which case the equation is
    the Stein equation ``X - A0^{-1} Ha X K^T = A0^{-1} rhs`` with
    ``A0 = I - l HaF``.  Serves as the reference when ``n m`` is too large for
    :func:`solve_system_dense`.
    """
    basis, Ha, HaF, _, rhs = system_operators(p, m)
    if HaF is None:
        X = SteinSolver(Ha).solve(p.K, rhs)
    else:
        ell = p.L[0, 0]
        if not np.allclose(p.L, ell * np.eye(p.n), rtol=0, atol=1e-15 * max(1.0, abs(ell))):
            raise InvalidArgumentError("direct solve requires L to be a multiple of the identity")
        A0 = np.eye(m) - ell * HaF
        X = SteinSolver(resolvent_solve(A0, Ha)).solve(p.K, resolvent_solve(A0, rhs))
    return _finalize(basis, X=X, cutoff=cutoff, info={"solver": "direct"}, real=not p.is_complex)


def _apply(A, X):
    return A @ X


def _orthonormalize(W: np.ndarray, V: np.ndarray | None, tol: float) -> np.ndarray:
    """MGS against ``V`` and within ``W``, one reorthogonalization pass, deflation."""
    ref = np.linalg.norm(W, axis=0)
    W = W.astype(complex if np.iscomplexobj(W) or (V is not None and np.iscomplexobj(V)) else float, copy=True)
    for _ in range(2):
        if V is not None and V.shape[1]:
            for i in range(V.shape[1]):
                v = V[:, i : i + 1]
                W -= v @ (v.conj().T @ W)
    keep = []
    for j in range(W.shape[1]):
        w = W[:, j]
        for _ in range(2):
            for q in keep:
                w = w - q * (q.conj() @ w)
        nrm = np.linalg.norm(w)
        if nrm > tol * max(ref[j], np.finfo(float).tiny):
            keep.append(w / nrm)
    if not keep:
        return np.zeros((W.shape[0], 0), dtype=W.dtype)
    return np.column_stack(keep)


def arnoldi_reduce(A, start: np.ndarray, q: int, deflation_tol: float = DEFLATION_TOL) -> KrylovReduction:
    """Block Arnoldi: orthonormal basis of ``span{S, A S, ..., A^{q-1} S}``.

    Parameters
    ----------
    A : array_like or LinearOperator
        Anything supporting ``A @ X``.
    start : ndarray
        ``n x s`` start block (a vector is treated as ``s = 1``).
    q : int
        Number of block steps.

    Raises
    ------
    InvalidArgumentError
        Zero start block or ``q * s > n``.
    """
    S = np.asarray(start)
    if S.ndim == 1:
        S = S[:, None]
    n, s = S.shape
    if not np.any(S):
        raise InvalidArgumentError("start block has zero norm")
    if q < 1 or q * s > n:
        raise InvalidArgumentError(f"need 1 <= q*s <= n, got q={q}, s={s}, n={n}")
    V0 = _orthonormalize(S, None, deflation_tol)
    blocks, products, widths = [V0], [], [V0.shape[1]]
    invariant = False
    for _ in range(q):
        AVk = _apply(A, blocks[-1])
        products.append(AVk)
        if len(blocks) == q:
            break
        Vall = np.column_stack(blocks)
        Wk = _orthonormalize(AVk, Vall, deflation_tol)
        if Wk.shape[1] == 0:
            invariant = True
            break
        blocks.append(Wk)
        widths.append(Wk.shape[1])
    V = np.column_stack(blocks)
    AV = np.column_stack(products)
    J = V.conj().T @ AV
    return KrylovReduction(V=V, J=J, AV=AV, widths=widths, invariant=invariant)


def _projected_stein(stein: SteinSolver, Ha, red: KrylovReduction, left, right):
    """Galerkin solve of ``X - Ha X K^T = left right^T`` with ``X = Z V^T``.

    Returns ``Z`` and the relative residual of the full equation.
    """
    V = red.V
    Z = stein.solve(red.J, left @ (V.conj().T @ right).T)
    R = Z @ V.T - Ha @ Z @ red.AV.T - left @ right.T
    return Z, float(np.linalg.norm(R) / np.linalg.norm(left @ right.T))


def solve_projected_autonomous(
    p: SystemProblem,
    m: int,
    j: int | None = None,
    tol: float = 1e-12,
    cutoff: CutoffPolicy = "auto",
) -> SystemSolution:
    """Krylov projection of the autonomous Stein equation onto ``K_j(K, u0)``.

    With ``j=None`` the dimension doubles from 8 until the relative residual of
    the full equation drops below ``tol`` (or the space is exhausted).
    """
    if not p.autonomous or p.N is not None:
        raise InvalidArgumentError("projected solve needs an autonomous, unforced problem")
    basis, Ha, _, b, _ = system_operators(p, m)
    stein = SteinSolver(Ha)
    n = p.n
    dims = [min(j, n)] if j is not None else []
    if j is None:
        d = min(8, n)
        while True:
            dims.append(d)
            if d == n:
                break
            d = min(2 * d, n)
    u0 = p.u0[:, None]
    for d in dims:
        red = arnoldi_reduce(p.K, u0, d)
        Z, res = _projected_stein(stein, Ha, red, b[:, None], u0)
        if j is not None or res < tol or red.invariant:
            break
    factors = LowRankFactors(Z, red.V)
    info = {"solver": "projected", "krylov_dim": red.V.shape[1], "residual": res}
    sol = _finalize(basis, factors=factors, cutoff=cutoff, info=info, real=not p.is_complex)
    sol.info["rank"] = int(np.linalg.matrix_rank(sol.coeffs, tol=COMPRESSION_TOL * np.linalg.norm(Z, 2)))
    return sol


def _compress(B: np.ndarray, C: np.ndarray, tol: float = COMPRESSION_TOL):
    """Truncated factors of ``B C^T`` at relative singular-value threshold ``tol``."""
    QB, RB = np.linalg.qr(B)
    QC, RC = np.linalg.qr(C)
    U, s, Vh = np.linalg.svd(RB @ RC.T)
    if s.size == 0 or s[0] == 0:
        return B[:, :0], C[:, :0]
    r = int(np.sum(s > tol * s[0]))
    return QB @ (U[:, :r] * s[:r]), QC @ Vh[:r].T


def _inner_solve(stein, Ha, K, Bh, Ch, tol):
    n, s = Ch.shape
    q_cap = max(n // max(s, 1), 1)
    q = 1
    while True:
        red = arnoldi_reduce(K, Ch, q)
        Z, res = _projected_stein(stein, Ha, red, Bh, Ch)
        if res < tol or red.invariant or q >= q_cap:
            return Z, red.V, res
        q = min(2 * q, q_cap)


def iterate_low_rank(
    p: SystemProblem,
    m: int,
    tol: float = 1e-10,
    max_iter: int = 200,
    stagnation: int = 20,
    cutoff: CutoffPolicy = "auto",
) -> SystemSolution:
    """Low-rank fixed-point iteration for ``L != 0``.

    Each sweep solves ``X_{k+1} - Ha X_{k+1} K^T = B_k C_k^T`` with
    ``B_k = [HaF L_k, b]`` and ``C_k = [L R_k, u0]``, after compressing the
    pair, by block Arnoldi on ``K`` from ``C_k`` with the Krylov depth doubled
    until the inner residual is below ``tol / 10``.  The sweep stops when the
    scalar estimate ``(|b|^T L_k)(R_k^T u0)`` changes by less than ``tol`` and
    the true residual is at most ``10 tol``; the true residual is also logged
    every 10 sweeps.

    Returns
    -------
    SystemSolution
        ``factors`` holds ``(L_k, R_k)``; ``info`` has the iteration history.

    Raises
    ------
    ConvergenceError
        The estimate fails to improve for ``stagnation`` consecutive sweeps or
        ``max_iter`` is exhausted.
    """
    if p.N is not None:
        raise InvalidArgumentError("low-rank iteration does not support a forcing term")
    basis, Ha, HaF, b, _ = system_operators(p, m)
    stein = SteinSolver(Ha)
    K = p.K
    Lm = p.L if p.L is not None else np.zeros_like(K)
    dtype = np.result_type(Ha, K, Lm, p.u0, complex if p.is_complex else float)
    left = np.zeros((m, 0), dtype=dtype)
    right = np.zeros((p.n, 0), dtype=dtype)
    u0 = p.u0.astype(dtype)[:, None]
    bb = b.astype(dtype)[:, None]
    absb = np.abs(b)
    estimate = 0.0
    history = []
    best, since_best = np.inf, 0
    for it in range(1, max_iter + 1):
        if HaF is not None and left.shape[1]:
            B = np.column_stack([HaF @ left, bb])
            C = np.column_stack([Lm @ right, u0])
        else:
            B, C = bb, u0
        Bh, Ch = _compress(B, C)
        Z, V, inner = _inner_solve(stein, Ha, K, Bh, Ch, tol / 10)
        Uz, sz, Wh = np.linalg.svd(Z, full_matrices=False)
        r = int(np.sum(sz > COMPRESSION_TOL * sz[0])) if sz.size else 0
        left = Uz[:, :r] * sz[:r]
        right = V @ Wh[:r].T
        new_est = complex((absb @ left) @ (right.T @ p.u0))
        diff = abs(new_est - estimate)
        estimate = new_est
        entry = {"iteration": it, "rank": r, "estimate_change": diff, "inner_residual": inner}
        check = diff < tol or it % 10 == 0 or p.autonomous
        if check:
            entry["residual"] = matrix_equation_residual(p, m, LowRankFactors(left, right))
        history.append(entry)
        logger.debug("low-rank sweep %s", entry)
        if (diff < tol or p.autonomous) and entry["residual"] <= 10 * tol:
            info = {"solver": "lowrank", "iterations": it, "rank": r, "history": history,
                    "residual": entry["residual"]}
            return _finalize(basis, factors=LowRankFactors(left, right), cutoff=cutoff, info=info,
                             real=not p.is_complex)
        if diff < best:
            best, since_best = diff, 0
        else:
            since_best += 1
            if since_best >= stagnation:
                raise ConvergenceError(f"low-rank iteration stagnated after {it} sweeps", {"history": history})
    raise ConvergenceError(f"low-rank iteration did not converge in {max_iter} sweeps", {"history": history})


def evaluate_system(sol: SystemSolution, t) -> np.ndarray:
    """``u_i(t) = sum_{j < cutoff_i} X_{j i} P_j(t)``; shape ``t.shape + (n,)``."""
    C = sol.coeffs
    phi = eval_basis(sol.basis, t)
    mask = np.arange(sol.basis.m)[:, None] < np.asarray(sol.cutoffs)[None, :]
    return phi @ np.where(mask, C, 0)
