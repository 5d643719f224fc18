"""Experiment drivers: solve a configured problem, compare with an independent
oracle and write CSV artifacts.

Every run writes into its own directory:

``solution.csv``
    ``t, component, value_re, value_im, oracle_re, oracle_im, abs_err, rel_err``
``coeffs.csv``
    ``component, index, abs_coeff, retained``
``summary.csv``
    ``experiment, solver, reference, m, k, abs_err, rel_err, rank``
``timing.csv``
    wall-clock seconds per stage, kept apart so the other files are
    byte-identical across runs of the same configuration
``config.yaml``
    the canonical form of the configuration that was run
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .abm import abm_solve, linear_field
from .config import ConstantFn, Guards, LinearFn, PowerFn, ProblemConfig, dump_config, parse_config
from .errors import AccuracyGuardError, ConfigError
from .scalar import ScalarProblem, solve_scalar
from .schrodinger import build_fd_schrodinger
from .special import gen_mittag_leffler, mittag_leffler, oracle_linear_t, pathsum_U
from .system import (
    SystemProblem,
    iterate_low_rank,
    solve_projected_autonomous,
    solve_system_dense,
    solve_system_direct,
)

__all__ = ["ExperimentResult", "PRESETS", "preset_config", "run_experiment", "check_guards", "fmt"]

logger = logging.getLogger(__name__)

SOLUTION_HEADER = ["t", "component", "value_re", "value_im", "oracle_re", "oracle_im", "abs_err", "rel_err"]
COEFF_HEADER = ["component", "index", "abs_coeff", "retained"]
SUMMARY_HEADER = ["experiment", "solver", "reference", "m", "k", "abs_err", "rel_err", "rank"]
TIMING_HEADER = ["experiment", "stage", "seconds"]


def fmt(x) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


@dataclass
class ExperimentResult:
    name: str
    solution_rows: list = field(default_factory=list)
    coeff_rows: list = field(default_factory=list)
    summary_rows: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


class _Timer:
    def __init__(self, res: ExperimentResult, stage: str):
        self.res, self.stage = res, stage

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.res.timings.append((self.res.name, self.stage, time.perf_counter() - self.t0))


def _relerr(value, ref):
    value, ref = np.asarray(value), np.asarray(ref)
    err = np.abs(value - ref)
    scale = np.abs(ref)
    return err, np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), err)


def _add_solution_rows(res: ExperimentResult, ts, values, oracle):
    """``values``/``oracle`` shaped ``(len(ts), n)``."""
    values = np.asarray(values).reshape(len(ts), -1)
    oracle = np.asarray(oracle).reshape(len(ts), -1)
    abs_e, rel_e = _relerr(values, oracle)
    for i, t in enumerate(ts):
        for c in range(values.shape[1]):
            v, o = complex(values[i, c]), complex(oracle[i, c])
            res.solution_rows.append([float(t), c, v.real, v.imag, o.real, o.imag, float(abs_e[i, c]), float(rel_e[i, c])])
    return abs_e, rel_e


def _add_coeff_rows(res: ExperimentResult, C, cutoffs):
    C = np.asarray(C).reshape(C.shape[0], -1)
    for c in range(C.shape[1]):
        for j in range(C.shape[0]):
            res.coeff_rows.append([c, j, float(abs(C[j, c])), int(j < cutoffs[c])])


# -- scalar --------------------------------------------------------------------


def _scalar_oracle(cfg: ProblemConfig, ts: np.ndarray):
    s = cfg.scalar
    a = cfg.alpha
    if s.oracle == "mittag_leffler":
        if not isinstance(s.f, ConstantFn) or s.g is not None:
            raise ConfigError("mittag_leffler oracle needs a constant f and no forcing g")
        return np.array([s.y0 * mittag_leffler(a, s.f.value * t**a).real for t in ts])
    if s.oracle == "linear_t":
        if not (isinstance(s.f, LinearFn) and s.f.slope == 1.0 and s.f.intercept == 0.0) or s.g is not None:
            raise ConfigError("linear_t oracle needs f = t and no forcing g")
        return np.array([oracle_linear_t(a, s.y0, float(t)) for t in ts])
    if s.oracle == "forced_ml":
        # y = y0 E_a(F t^a) + c Gamma(p+1) t^(p+a) E_{a, p+a+1}(F t^a) for g = c t^p
        if not isinstance(s.f, ConstantFn) or not isinstance(s.g, (PowerFn, type(None))):
            raise ConfigError("forced_ml oracle needs a constant f and a power-law forcing g")
        F = s.f.value
        out = []
        for t in ts:
            z = F * t**a
            y = s.y0 * mittag_leffler(a, z).real
            if s.g is not None:
                p, c = s.g.exponent, s.g.coefficient
                y += c * math.gamma(p + 1.0) * t ** (p + a) * gen_mittag_leffler(a, p + a + 1.0, z).real
            out.append(y)
        return np.array(out)
    if s.oracle == "abm":
        f, g = s.f, s.g
        field_ = (lambda t, u: f(t) * u + g(t)) if g is not None else (lambda t, u: f(t) * u)
        tr = abm_solve(a, field_, np.array([s.y0]), cfg.T, cfg.dt)
        return np.interp(ts, tr.times, tr.values[:, 0].real)
    raise ConfigError("scalar experiments need an oracle")


def _run_scalar(cfg: ProblemConfig, res: ExperimentResult):
    s = cfg.scalar
    p = ScalarProblem(
        cfg.alpha, s.f.to_callable(), s.y0, cfg.T,
        g=None if s.g is None else s.g.to_callable(), expansion_tol=s.expansion_tol,
    )
    with _Timer(res, "solve"):
        sol = solve_scalar(p, cfg.m, cfg.cutoff)
    ts = np.linspace(0.0, cfg.T, cfg.grid_points)
    vals = sol(ts)
    with _Timer(res, "oracle"):
        ref = _scalar_oracle(cfg, ts)
    abs_e, rel_e = _add_solution_rows(res, ts, vals, ref)
    _add_coeff_rows(res, sol.coeffs[:, None], [sol.cutoff])
    res.summary_rows.append([res.name, cfg.solver, s.oracle, cfg.m, sol.cutoff, abs_e.max(), rel_e.max(), ""])
    res.metrics.update(_profile_metrics(cfg.guards, ts, abs_e[:, 0], rel_e[:, 0]))
    res.metrics["k"] = sol.cutoff


def _profile_metrics(g: Guards, ts, abs_e, rel_e) -> dict:
    lo, hi = g.interior_window
    inside = (ts >= lo) & (ts <= hi)
    return {
        "first": float(rel_e[0]),
        "last": float(rel_e[-1]),
        "interior": float(rel_e[inside].max()) if inside.any() else 0.0,
        "max_abs": float(abs_e.max()),
        "max_rel": float(rel_e.max()),
    }


# -- small systems -------------------------------------------------------------


def _system_problem(cfg: ProblemConfig) -> SystemProblem:
    s = cfg.system
    return SystemProblem(
        cfg.alpha, np.array(s.K, dtype=float), np.array(s.u0, dtype=float), cfg.T,
        L=None if s.L is None else np.array(s.L, dtype=float),
        f=None if s.f is None else s.f.to_callable(),
    )


def _solve_system(cfg: ProblemConfig, p: SystemProblem, krylov_dim=None):
    if cfg.solver == "dense":
        return solve_system_dense(p, cfg.m, cfg.cutoff)
    if cfg.solver in ("stein", "direct"):
        return solve_system_direct(p, cfg.m, cfg.cutoff)
    if cfg.solver == "projected":
        return solve_projected_autonomous(p, cfg.m, j=krylov_dim, cutoff=cfg.cutoff)
    if cfg.solver == "lowrank":
        return iterate_low_rank(p, cfg.m, cutoff=cfg.cutoff)
    raise ConfigError(f"solver {cfg.solver!r} does not produce spectral coefficients")


def _abm_reference(cfg: ProblemConfig, p: SystemProblem):
    if p.autonomous:
        M = p.K
    elif callable(p.f):
        M = lambda t: p.K + p.f(t) * p.L
    else:
        M = p.K + p.f * p.L
    return abm_solve(cfg.alpha, linear_field(M), p.u0, cfg.T, cfg.dt)


def _system_oracle(cfg: ProblemConfig, p: SystemProblem, ts):
    s = cfg.system
    if s.oracle == "pathsum":
        ok = (
            np.array_equal(p.K, [[1, 0], [1, 0]])
            and p.L is not None
            and np.array_equal(p.L, [[1, -1], [0, 0]])
            and isinstance(s.f, LinearFn) and s.f.slope == 1.0 and s.f.intercept == 0.0
        )
        if not ok:
            raise ConfigError("pathsum oracle needs K=[[1,0],[1,0]], L=[[1,-1],[0,0]], f=t")
        return np.array([pathsum_U(cfg.alpha, float(t)) @ p.u0 for t in ts])
    if s.oracle == "mittag_leffler_diag":
        if not p.autonomous or np.count_nonzero(p.K - np.diag(np.diag(p.K))):
            raise ConfigError("mittag_leffler_diag oracle needs a diagonal autonomous system")
        d = np.diag(p.K)
        return np.array([[p.u0[i] * mittag_leffler(cfg.alpha, d[i] * t**cfg.alpha).real
                          for i in range(p.n)] for t in ts])
    if s.oracle == "abm":
        tr = _abm_reference(cfg, p)
        return np.column_stack([np.interp(ts, tr.times, tr.values[:, i].real) for i in range(p.n)])
    raise ConfigError("system experiments need an oracle")


def _run_system(cfg: ProblemConfig, res: ExperimentResult):
    p = _system_problem(cfg)
    ts = np.linspace(0.0, cfg.T, cfg.grid_points)
    if cfg.solver == "abm":
        if cfg.system.oracle == "abm":
            raise ConfigError("abm solver cannot be checked against itself")
        with _Timer(res, "solve"):
            tr = _abm_reference(cfg, p)
        vals = np.column_stack([np.interp(ts, tr.times, tr.values[:, i].real) for i in range(p.n)])
        k, rank = "", ""
    else:
        with _Timer(res, "solve"):
            sol = _solve_system(cfg, p)
        vals = sol(ts).real
        _add_coeff_rows(res, sol.coeffs, sol.cutoffs)
        k = int(np.max(sol.cutoffs))
        rank = sol.info.get("rank", "")
        res.metrics["k"] = k
    with _Timer(res, "oracle"):
        ref = _system_oracle(cfg, p, ts)
    abs_e, rel_e = _add_solution_rows(res, ts, vals, ref)
    res.summary_rows.append([res.name, cfg.solver, cfg.system.oracle, cfg.m, k, abs_e.max(), rel_e.max(), rank])
    res.metrics.update(_profile_metrics(cfg.guards, ts, abs_e.max(axis=1), rel_e.max(axis=1)))
    if rank != "":
        res.metrics["rank"] = int(rank)


# -- Schroedinger --------------------------------------------------------------


def _run_schrodinger(cfg: ProblemConfig, res: ExperimentResult):
    s = cfg.schrodinger
    asm = build_fd_schrodinger(s.grid_n, cfg.alpha, s.time_dependent)
    p = asm.problem(cfg.T)
    T = cfg.T
    if cfg.solver == "abm":
        raise ConfigError("use a spectral solver for Schroedinger experiments; abm is the reference")
    with _Timer(res, "solve"):
        sol = _solve_system(cfg, p, krylov_dim=s.krylov_dim)
    u_T = sol(np.array([T]))[0]
    k = int(np.max(sol.cutoffs))
    rank = sol.info.get("rank")
    if rank is None:
        rank = int(np.linalg.matrix_rank(sol.coeffs, tol=1e-10 * np.linalg.norm(sol.coeffs, 2)))
    res.metrics.update(k=k, rank=int(rank))
    _add_coeff_rows(res, sol.coeffs, sol.cutoffs)
    oracle_vals = None
    if s.reference in ("direct", "both") and cfg.solver != "direct":
        with _Timer(res, "direct"):
            ref = solve_system_direct(p, cfg.m, cfg.cutoff)
        Xd = ref.coeffs
        rel = float(np.linalg.norm(sol.coeffs - Xd) / np.linalg.norm(Xd))
        absd = float(np.max(np.abs(sol.coeffs - Xd)))
        res.metrics["direct_rel"] = rel
        res.summary_rows.append([res.name, cfg.solver, "direct", cfg.m, k, absd, rel, rank])
        oracle_vals = ref(np.array([T]))[0]
    if s.reference in ("abm", "both"):
        with _Timer(res, "abm"):
            tr = _abm_reference(cfg, p)
        uT = tr.final
        diff = np.linalg.norm(u_T - uT)
        rel = float(diff / np.linalg.norm(uT))
        res.metrics["abm_rel"] = rel
        res.summary_rows.append([res.name, cfg.solver, "abm", cfg.m, k, float(np.max(np.abs(u_T - uT))), rel, rank])
        oracle_vals = uT
    if oracle_vals is None:
        raise ConfigError("Schroedinger experiments need a reference other than the solver itself")
    _add_solution_rows(res, np.array([T]), u_T[None, :], oracle_vals[None, :])


# -- driver --------------------------------------------------------------------


def check_guards(g: Guards, metrics: dict) -> list[str]:
    """Names and values of every guard that ``metrics`` violates."""
    out = []
    for key in ("first", "last", "interior", "max_abs", "max_rel", "abm_rel", "direct_rel", "max_rank"):
        bound = getattr(g, key)
        if bound is None:
            continue
        mkey = "rank" if key == "max_rank" else key
        if mkey not in metrics:
            out.append(f"{key}: metric not produced by this experiment")
        elif not metrics[mkey] <= bound:
            out.append(f"{key}: {metrics[mkey]:.3e} > {bound:.3e}")
    return out


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


def run_experiment(cfg: ProblemConfig, out_dir=None, name: str = "solve", enforce_guards: bool = True) -> ExperimentResult:
    """Run ``cfg``, write the CSV artifacts to ``out_dir`` (if given) and check guards.

    Raises
    ------
    AccuracyGuardError
        After the artifacts are written, if ``enforce_guards`` and a guard fails.
    """
    res = ExperimentResult(name=name)
    runner = {"scalar": _run_scalar, "system": _run_system, "schrodinger": _run_schrodinger}[cfg.kind]
    runner(cfg, res)
    res.violations = check_guards(cfg.guards, res.metrics)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "solution.csv", SOLUTION_HEADER, res.solution_rows)
        _write_csv(out / "coeffs.csv", COEFF_HEADER, res.coeff_rows)
        _write_csv(out / "summary.csv", SUMMARY_HEADER, res.summary_rows)
        _write_csv(out / "timing.csv", TIMING_HEADER, res.timings)
        (out / "config.yaml").write_text(dump_config(cfg))
    for v in res.violations:
        logger.warning("%s guard violated: %s", name, v)
    if enforce_guards and res.violations:
        raise AccuracyGuardError(f"{name}: " + "; ".join(res.violations))
    return res


# -- presets -------------------------------------------------------------------

PRESETS: dict[str, dict] = {
    "fig1": dict(
        kind="scalar", alpha=0.7, T=2.0, m=200, cutoff=140,
        scalar=dict(f=dict(type="constant", value=-1.0), y0=1.0, oracle="mittag_leffler"),
        guards=dict(first=1e-3, last=1e-3, interior=1e-5),
    ),
    "fig2a": dict(
        kind="scalar", alpha=0.5, T=2.0, m=100, cutoff=70,
        scalar=dict(f=dict(type="linear"), y0=1.0, oracle="linear_t"),
        guards=dict(first=1e-5, interior=1e-7),
    ),
    "fig2b": dict(
        kind="scalar", alpha=1.0 / 3.0, T=2.0, m=100, cutoff=70,
        scalar=dict(f=dict(type="linear"), y0=1.0, oracle="linear_t"),
        guards=dict(first=1e-4, interior=1e-6),
    ),
    "pathsum": dict(
        kind="system", alpha=0.5, T=1.0, m=100, cutoff="auto", solver="dense", grid_points=101,
        system=dict(K=[[1.0, 0.0], [1.0, 0.0]], L=[[1.0, -1.0], [0.0, 0.0]], f=dict(type="linear"),
                    u0=[1.0, 0.0], oracle="pathsum"),
        guards=dict(max_abs=1e-6),
    ),
    "schrodinger-ti": dict(
        kind="schrodinger", alpha=0.5, T=1.0, m=500, cutoff=116, solver="projected", dt=1e-4,
        schrodinger=dict(grid_n=15, time_dependent=False, reference="both"),
        guards=dict(direct_rel=1e-8, abm_rel=5e-3),
    ),
    "schrodinger-td": dict(
        kind="schrodinger", alpha=0.3, T=1.0, m=100, cutoff="auto", solver="lowrank", dt=1e-4,
        schrodinger=dict(grid_n=15, time_dependent=True, reference="direct"),
        guards=dict(direct_rel=1e-8, max_rank=25),
    ),
}


def preset_config(name: str, m: int | None = None, cutoff=None) -> ProblemConfig:
    """Validated preset, optionally with ``m`` and ``cutoff`` overridden."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    data = dict(PRESETS[name])
    if m is not None:
        data["m"] = m
    if cutoff is not None:
        data["cutoff"] = cutoff
    return parse_config(data)
