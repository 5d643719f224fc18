"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a red criterion still reports its measured numbers.
"""

import time

import numpy as np
import pytest

from starfode.abm import abm_solve, linear_field
from starfode.legendre import make_basis
from starfode.scalar import ScalarProblem, SpectralSolution, solve_scalar
from starfode.schrodinger import build_fd_schrodinger
from starfode.special import linear_t_closed_form, linear_t_series, mittag_leffler, pathsum_U
from starfode.star import FracPowerConfig, frac_power, theta_matrix
from starfode.system import (
    SteinSolver,
    SystemProblem,
    iterate_low_rank,
    solve_projected_autonomous,
    solve_system_dense,
    solve_system_direct,
)
from starfode.star import theta_power
from tests.acceptance_log import record

GRID = np.linspace(0.0, 2.0, 200)
INTERIOR = (GRID >= 0.1) & (GRID <= 1.98)


def _profile(sol, ref):
    rel = np.abs(sol(GRID) - ref) / np.abs(ref)
    return rel[0], rel[-1], rel[INTERIOR].max()


def test_criterion_1_relaxation():
    t0 = time.perf_counter()
    sol = solve_scalar(ScalarProblem(0.7, -1.0, 1.0, 2.0), 200, cutoff=140)
    ref = np.array([mittag_leffler(0.7, -(t**0.7)).real for t in GRID])
    first, last, interior = _profile(sol, ref)
    wall = time.perf_counter() - t0
    ok = first <= 1e-3 and last <= 1e-3 and interior <= 1e-5 and wall <= 10
    record(1, ok, f"first={first:.2e} last={last:.2e} interior={interior:.2e} time={wall:.2f}s")
    assert ok


@pytest.mark.parametrize(
    "number, alpha, first_tol, interior_tol", [(2, 0.5, 1e-5, 1e-7), (3, 1 / 3, 1e-4, 1e-6)]
)
def test_criteria_2_3_linear_coefficient(number, alpha, first_tol, interior_tol):
    t0 = time.perf_counter()
    sol = solve_scalar(ScalarProblem(alpha, lambda t: t, 1.0, 2.0), 100, cutoff=70)
    ref = np.array([linear_t_closed_form(alpha, 1.0, t) for t in GRID])
    first, last, interior = _profile(sol, ref)
    wall = time.perf_counter() - t0
    ok = first <= first_tol and interior <= interior_tol and wall <= 5
    record(number, ok, f"alpha={alpha:.4g} first={first:.2e} interior={interior:.2e} last={last:.2e} time={wall:.2f}s")
    assert ok


def test_criterion_4_pathsum():
    t0 = time.perf_counter()
    t = np.linspace(0.0, 1.0, 101)
    K = np.array([[1.0, 0.0], [1.0, 0.0]])
    L = np.array([[1.0, -1.0], [0.0, 0.0]])
    parts = []
    worst = 0.0
    for alpha in (0.5, 0.9):
        U = np.array([pathsum_U(alpha, x) for x in t])
        err = np.zeros_like(U)
        for col in range(2):
            p = SystemProblem(alpha, K, np.eye(2)[col], 1.0, L=L, f=lambda s: s)
            err[:, :, col] = np.abs(solve_system_dense(p, 100)(t) - U[:, :, col])
        inner = err[(t >= 0.1) & (t <= 0.9)].max()
        parts.append(f"alpha={alpha}: max={err.max():.2e} (t=0: {err[0].max():.2e}, t=1: {err[-1].max():.2e}, "
                     f"[0.1,0.9]: {inner:.2e})")
        worst = max(worst, err.max())
    wall = time.perf_counter() - t0
    ok = worst <= 1e-6 and wall <= 10
    record(4, ok, "; ".join(parts) + f" time={wall:.2f}s"
           + ("" if ok else " -- the t^alpha component of the solution caps polynomial accuracy, worst at the endpoints"))
    assert ok


def test_criterion_5_dual_formulas():
    t = np.linspace(0.0, 1.5, 20)
    dual = max(abs(linear_t_series(a, 1.0, x) - linear_t_closed_form(a, 1.0, x)) / max(1.0, abs(linear_t_closed_form(a, 1.0, x)))
               for a in (0.5, 1 / 3, 1.0) for x in t)
    x = np.linspace(0.0, 5.0, 20)
    exp_err = max(abs(mittag_leffler(1.0, v) - np.exp(v)) / np.exp(v) for v in x)
    cos_err = max(abs(mittag_leffler(2.0, -v * v) - np.cos(v)) for v in x)
    ok = dual <= 1e-10 and exp_err <= 1e-12 and cos_err <= 1e-12
    record(5, ok, f"series/closed-form={dual:.2e} E1-exp={exp_err:.2e} E2-cos={cos_err:.2e}")
    assert ok


def test_criterion_6_linear_algebra():
    t0 = time.perf_counter()
    stein = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n, m = 10, 60
        K = rng.standard_normal((n, n)) / np.sqrt(n)
        u0 = rng.standard_normal(n)
        Ha = theta_power(make_basis(1.0, m), 0.5).entries
        C = np.outer(make_basis(1.0, m).constant_coeffs(), u0)
        X = SteinSolver(Ha).solve(K, C)
        A = np.eye(n * m) - np.kron(K, Ha)
        r = A @ X.reshape(-1, order="F") - C.reshape(-1, order="F")
        stein = max(stein, np.linalg.norm(r) / np.linalg.norm(C))
    rng = np.random.default_rng(7)
    K = rng.standard_normal((8, 8)) / 3
    p = SystemProblem(0.5, K, rng.standard_normal(8))
    dense = solve_system_dense(p, 40).coeffs
    krylov = np.linalg.norm(solve_projected_autonomous(p, 40, j=8).coeffs - dense) / np.linalg.norm(dense)
    semi = 0.0
    for m in (20, 50, 200):
        H = theta_matrix(make_basis(1.0, m)).entries
        for a in (0.3, 0.5, 0.7):
            semi = max(semi, np.linalg.norm(frac_power(H, a) @ frac_power(H, 1 - a) - H) / np.linalg.norm(H))
    H = theta_matrix(make_basis(2.0, 20))
    s = frac_power(H, 0.5).entries
    route = np.linalg.norm(s - frac_power(H, 0.5, FracPowerConfig(route="series")).entries) / np.linalg.norm(s)
    wall = time.perf_counter() - t0
    ok = stein <= 1e-10 and krylov <= 1e-10 and semi <= 1e-8 and route <= 1e-8 and wall <= 60
    record(6, ok, f"stein={stein:.2e} krylov={krylov:.2e} semigroup={semi:.2e} routes={route:.2e} time={wall:.2f}s")
    assert ok


def test_criterion_7_schrodinger():
    t0 = time.perf_counter()
    m = 500
    asm = build_fd_schrodinger(15, 0.5)
    p = asm.problem(1.0)
    proj = solve_projected_autonomous(p, m)
    direct = solve_system_direct(p, m)
    agree_ti = np.linalg.norm(proj.coeffs - direct.coeffs) / np.linalg.norm(direct.coeffs)
    ref = abm_solve(0.5, linear_field(p.K), p.u0, 1.0, 1e-4).final
    abm_rel = {}
    for label, k in (("k=116", 116), ("k=0.7m", int(0.7 * m)), ("auto", "auto")):
        cut = proj.cutoffs if k == "auto" else np.full(p.n, k)
        u = (proj.coeffs * (np.arange(m)[:, None] < cut[None, :])).T @ make_basis(1.0, m)(1.0)
        abm_rel[label] = np.linalg.norm(u - ref) / np.linalg.norm(ref)
    td = build_fd_schrodinger(15, 0.3, time_dependent=True).problem(1.0)
    lr = iterate_low_rank(td, 100)
    dtd = solve_system_direct(td, 100)
    agree_td = np.linalg.norm(lr.coeffs - dtd.coeffs) / np.linalg.norm(dtd.coeffs)
    wall = time.perf_counter() - t0
    ok = agree_ti <= 1e-8 and abm_rel["k=116"] <= 5e-3 and lr.factors.rank <= 25 and agree_td <= 1e-8 and wall <= 300
    record(7, ok, f"TI: projected-vs-direct={agree_ti:.2e} rank={proj.info['rank']} "
           f"ABM rel " + " ".join(f"{k}:{v:.2e}" for k, v in abm_rel.items())
           + f"; TD: rank={lr.factors.rank} sweeps={lr.info['iterations']} lowrank-vs-direct={agree_td:.2e} time={wall:.1f}s")
    assert ok


def test_criterion_8_manufactured():
    alpha = 0.5
    from math import gamma

    sol = solve_scalar(
        ScalarProblem(alpha, 0.0, 0.0, 1.0, g=lambda t: t ** (1 - alpha) / gamma(2 - alpha), expansion_tol=1e-11), 100
    )
    t = np.linspace(0.0, 1.0, 201)
    err = np.max(np.abs(sol(t) - t))
    ok = err <= 1e-8
    record(8, ok, f"max|y - t|={err:.2e} cutoff={sol.cutoff}")
    assert ok
