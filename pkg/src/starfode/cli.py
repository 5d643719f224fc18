"""``starfode`` command line.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 accuracy-guard
failure.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import bench
from .config import load_config
from .errors import (
    AccuracyError,
    AccuracyGuardError,
    BranchError,
    ConfigError,
    DomainError,
    InvalidArgumentError,
    ResourceError,
    SolverError,
)
from .special import mittag_leffler, gen_mittag_leffler, pathsum_U, pfq

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_GUARD = 0, 2, 3, 4

_SOLVER_ERRORS = (SolverError, AccuracyError, BranchError, ResourceError, DomainError, InvalidArgumentError)


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guarded(fn):
    try:
        return fn()
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except AccuracyGuardError as exc:
        _fail(EXIT_GUARD, str(exc))
    except _SOLVER_ERRORS as exc:
        _fail(EXIT_SOLVER, f"{type(exc).__name__}: {exc}")


def _report(res: bench.ExperimentResult, out: Path | None):
    for row in res.summary_rows:
        click.echo(",".join(bench.fmt(x) for x in row))
    if out is not None:
        click.echo(f"wrote {out}", err=True)


def _parse_cutoff(value):
    if value is None or value == "auto":
        return value
    try:
        k = int(value)
    except ValueError:
        raise click.BadParameter("cutoff must be 'auto' or a positive integer") from None
    if k < 1:
        raise click.BadParameter("cutoff must be positive")
    return k


def _parse_complex(value: str) -> complex:
    try:
        return complex(value.replace(" ", ""))
    except ValueError:
        raise click.BadParameter(f"not a number: {value!r}") from None


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def cli(verbose):
    """Spectral solvers for linear Caputo fractional ODEs."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.argument("config_file", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for CSV output.")
def solve(config_file, out):
    """Run the problem described by CONFIG_FILE (YAML)."""
    def run():
        cfg = load_config(config_file)
        res = bench.run_experiment(cfg, out, name=Path(config_file).stem)
        _report(res, out and Path(out))

    _guarded(run)


@cli.command(name="bench")
@click.argument("experiment", type=click.Choice(sorted(bench.PRESETS)))
@click.option("--m", "m", type=click.IntRange(min=8), default=None, help="Number of basis functions.")
@click.option("--cutoff", default=None, help="'auto' or the number of retained coefficients.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for CSV output.")
def bench_cmd(experiment, m, cutoff, out):
    """Reproduce one of the reference experiments."""
    k = _parse_cutoff(cutoff)

    def run():
        cfg = bench.preset_config(experiment, m=m, cutoff=k)
        res = bench.run_experiment(cfg, out, name=experiment)
        _report(res, out and Path(out))

    _guarded(run)


@cli.group()
def oracle():
    """Evaluate the special functions used as oracles."""


@oracle.command()
@click.option("--alpha", type=float, required=True)
@click.option("--beta", type=float, default=1.0, show_default=True)
@click.option("--z", "z", required=True, help="Real or complex argument, e.g. -2 or 1+2j.")
def ml(alpha, beta, z):
    """Mittag-Leffler function E_{alpha,beta}(z)."""
    zc = _parse_complex(z)

    def run():
        if beta == 1.0:
            v, e = mittag_leffler(alpha, zc, return_error=True)
        else:
            v, e = gen_mittag_leffler(alpha, beta, zc, return_error=True)
        click.echo(f"{_fmt_value(v)},{e:.3e}")

    _guarded(run)


@oracle.command(name="pfq")
@click.option("--a", "a", default="", help="Comma-separated numerator parameters.")
@click.option("--b", "b", default="", help="Comma-separated denominator parameters.")
@click.option("--z", "z", required=True)
def pfq_cmd(a, b, z):
    """Generalized hypergeometric function pFq(a; b; z)."""
    av = [float(x) for x in a.split(",") if x.strip()]
    bv = [float(x) for x in b.split(",") if x.strip()]
    zc = _parse_complex(z)

    def run():
        v, e = pfq(av, bv, zc, return_error=True)
        click.echo(f"{_fmt_value(v)},{e:.3e}")

    _guarded(run)


@oracle.command(name="pathsum")
@click.option("--alpha", type=float, required=True)
@click.option("--t", "t", type=float, required=True)
def pathsum_cmd(alpha, t):
    """Fundamental matrix of the 2x2 path-sum test system at time t."""
    def run():
        U, e = pathsum_U(alpha, t, return_error=True)
        for row in np.asarray(U):
            click.echo(",".join(bench.fmt(float(x)) for x in row))
        click.echo(f"# truncation {e:.3e}", err=True)

    _guarded(run)


def _fmt_value(v) -> str:
    v = complex(v)
    if v.imag == 0.0:
        return bench.fmt(v.real)
    return f"{bench.fmt(v.real)},{bench.fmt(v.imag)}"


def main(argv=None):
    """Console entry point; usage errors exit with code 2 (click's default)."""
    try:
        cli.main(args=argv, prog_name="starfode", standalone_mode=True)
    except SystemExit as exc:
        raise SystemExit(exc.code if exc.code is not None else EXIT_OK)


if __name__ == "__main__":  # pragma: no cover
    main()
