"""Series oracles: Mittag-Leffler, generalized hypergeometric, closed-form
solutions of two scalar model problems and the double series for the 2x2
path-sum example.

Every series is accumulated with :func:`math.fsum` on real and imaginary
parts separately and reports the magnitude of the first omitted term, floored
by the rounding error of any cancellation, as its error estimate.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import AccuracyError, DomainError, InvalidArgumentError

__all__ = [
    "SeriesControl",
    "SeriesValue",
    "mittag_leffler",
    "gen_mittag_leffler",
    "pfq",
    "oracle_autonomous",
    "oracle_linear_t",
    "linear_t_series",
    "linear_t_closed_form",
    "pathsum_U",
]

ML_MAX_ABS_Z = 30.0
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SeriesControl:
    """Stopping rule: ``|term| < tol * |partial|`` twice in a row, at most
    ``max_terms`` terms (single series) or ``k_max`` per index (double series)."""

    tol: float = 1e-15
    max_terms: int = 2000
    k_max: int = 120


DEFAULT_CONTROL = SeriesControl()


class SeriesValue(NamedTuple):
    value: complex
    error: float
    terms: int


class _Accumulator:
    def __init__(self):
        self.re: list[float] = []
        self.im: list[float] = []
        self.sum_abs = 0.0
        self.max_log = 0.0

    def add(self, term: complex):
        self.re.append(term.real)
        self.im.append(term.imag)
        a = abs(term)
        self.sum_abs += a
        if a > 0:
            self.max_log = max(self.max_log, abs(math.log(a)))

    @property
    def rounding(self) -> float:
        # terms formed through exp(log ...) carry relative error ~ eps * |log term|
        return _EPS * self.sum_abs * (1.0 + self.max_log)

    @property
    def value(self) -> complex:
        return complex(math.fsum(self.re), math.fsum(self.im))


def _run_series(term_fn, ctl: SeriesControl, what: str, decreasing_ratio=None) -> SeriesValue:
    """Sum ``term_fn(0), term_fn(1), ...`` until two consecutive terms are negligible.

    The returned error is the first omitted term, floored by the rounding
    error of the accumulated cancellation.
    """
    acc = _Accumulator()
    small = 0
    term = 0j
    try:
        for k in range(ctl.max_terms):
            term = term_fn(k)
            acc.add(term)
            partial = abs(acc.value)
            if abs(term) <= ctl.tol * partial or (term == 0 and partial == 0 and k > 0):
                small += 1
                if small >= 2 and (decreasing_ratio is None or decreasing_ratio(k)):
                    v = acc.value
                    err = max(abs(term_fn(k + 1)), acc.rounding)
                    if acc.rounding >= abs(v) and acc.rounding > 0:
                        raise AccuracyError(
                            f"{what}: cancellation leaves no correct digits "
                            f"(sum of |terms| {acc.sum_abs:.3e}, value {abs(v):.3e})",
                            estimate=err,
                        )
                    return SeriesValue(v, err, k + 1)
            else:
                small = 0
    except OverflowError as exc:
        raise AccuracyError(f"{what}: term overflow ({exc})") from exc
    raise AccuracyError(f"{what}: not converged in {ctl.max_terms} terms", estimate=abs(term))


def _check_ml_args(alpha: float, z: complex):
    if not alpha > 0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha}")
    if abs(z) > ML_MAX_ABS_Z:
        raise DomainError(f"|z| = {abs(z):.3g} exceeds the series domain |z| <= {ML_MAX_ABS_Z}")


def mittag_leffler(alpha: float, z: complex, ctl: SeriesControl = DEFAULT_CONTROL, *, return_error=False):
    """``E_alpha(z) = sum_k z^k / Gamma(alpha k + 1)`` for ``|z| <= 30``.

    Terms are formed in log space, ``exp(k log z - lgamma(alpha k + 1))``.
    """
    _check_ml_args(alpha, z)
    z = complex(z)
    if z == 0:
        res = SeriesValue(1.0 + 0j, 0.0, 1)
    else:
        logabs = math.log(abs(z))
        phase = cmath.phase(z)

        def term(k):
            mag = math.exp(k * logabs - math.lgamma(alpha * k + 1.0))
            if z.imag == 0.0:
                return complex(-mag if (z.real < 0 and k % 2) else mag)
            return mag * cmath.exp(1j * k * phase)

        res = _run_series(term, ctl, "mittag_leffler")
    return (res.value, res.error) if return_error else res.value


def gen_mittag_leffler(
    alpha: float, beta: float, z: complex, ctl: SeriesControl = DEFAULT_CONTROL, *, return_error=False
):
    """``E_{alpha,beta}(z) = sum_k z^k / Gamma(alpha k + beta)``.

    Uses running powers of ``z`` and reciprocal Gamma values, a different
    evaluation path from :func:`mittag_leffler`.
    """
    _check_ml_args(alpha, z)
    z = complex(z)
    powers = [1.0 + 0j]

    def term(k):
        while len(powers) <= k:
            powers.append(powers[-1] * z)
        r = float(rgamma(alpha * k + beta))
        if r == 0.0 and alpha * k + beta > 171:
            # reciprocal Gamma underflows long after powers of |z| <= 30 matter
            return cmath.exp(k * cmath.log(z) - float(gammaln(alpha * k + beta))) if z != 0 else 0j
        return powers[k] * r

    if z == 0:
        res = SeriesValue(complex(rgamma(beta)), 0.0, 1)
    else:
        res = _run_series(term, ctl, "gen_mittag_leffler")
    return (res.value, res.error) if return_error else res.value


def _is_nonpositive_int(x) -> bool:
    return np.isreal(x) and float(np.real(x)) <= 0 and float(np.real(x)).is_integer()


def pfq(a: Sequence, b: Sequence, z: complex, ctl: SeriesControl = DEFAULT_CONTROL, *, return_error=False):
    """Generalized hypergeometric series ``pFq(a; b; z)``.

    Raises
    ------
    InvalidArgumentError
        A lower parameter is a nonpositive integer.
    DomainError
        ``p > q + 1``, or ``p = q + 1`` with ``|z| >= 1``.
    """
    a = list(a)
    b = list(b)
    z = complex(z)
    if any(_is_nonpositive_int(x) for x in b):
        raise InvalidArgumentError("lower parameter at a pole of the Pochhammer symbol")
    p, q = len(a), len(b)
    if p > q + 1 and z != 0 and not any(_is_nonpositive_int(x) for x in a):
        raise DomainError("pFq with p > q + 1 diverges")
    if p == q + 1 and abs(z) >= 1 and not any(_is_nonpositive_int(x) for x in a):
        raise DomainError("pFq with p = q + 1 requires |z| < 1")
    terms = [1.0 + 0j]

    def term(k):
        while len(terms) <= k:
            j = len(terms) - 1
            r = z / (j + 1)
            for x in a:
                r *= x + j
            for y in b:
                r /= y + j
            terms.append(terms[-1] * r)
        return terms[k]

    def ratio_small(k):
        if terms[k] == 0:
            return True  # terminated by a nonpositive integer upper parameter
        # tail bound only valid once the term ratio has settled below one
        num = np.prod([abs(x + k) for x in a]) if a else 1.0
        den = np.prod([abs(y + k) for y in b]) if b else 1.0
        return abs(z) * num / (den * (k + 1)) < 1.0

    res = _run_series(term, ctl, "pfq", decreasing_ratio=ratio_small)
    return (res.value, res.error) if return_error else res.value


def oracle_autonomous(alpha: float, F: complex, y0, t: float, ctl: SeriesControl = DEFAULT_CONTROL):
    """Solution ``y0 E_alpha(F t^alpha)`` of ``D^alpha y = F y``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    v = y0 * mittag_leffler(alpha, F * t**alpha, ctl)
    return v.real if np.isrealobj(F) and np.isrealobj(y0) else v


def linear_t_series(alpha: float, y0, t: float, ctl: SeriesControl = DEFAULT_CONTROL, *, return_error=False):
    """Series solution of ``D^alpha y = t y``, ``y(0) = y0``, valid for every ``alpha > 0``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0:
        return (y0, 0.0) if return_error else y0
    g = 1.0 / (alpha + 1.0)
    lt = math.log(t)
    la = math.log(alpha + 1.0)

    def term(k):
        e = k * la + math.lgamma(k + g + 1.0) - math.lgamma(alpha * k + k + alpha + 2.0)
        return complex(math.exp(e + (alpha + 1.0) * (k + 1) * lt))

    res = _run_series(term, ctl, "linear_t_series")
    pre = y0 / math.gamma(1.0 + g)
    val = y0 + pre * res.value.real
    return (val, abs(pre) * res.error) if return_error else val


def linear_t_closed_form(alpha: float, y0, t: float, ctl: SeriesControl = DEFAULT_CONTROL):
    """Hypergeometric closed forms of :func:`linear_t_series` for ``alpha`` in {1/2, 1/3, 1}."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if math.isclose(alpha, 1.0):
        return y0 * math.exp(t * t / 2.0)
    if math.isclose(alpha, 0.5):
        z = t**3 / 3.0
        v = 4.0 * t**1.5 / (3.0 * math.sqrt(math.pi)) * pfq([1, 4 / 3], [7 / 6, 3 / 2], z, ctl) + pfq(
            [5 / 6], [2 / 3], z, ctl
        )
        return y0 * v.real
    if math.isclose(alpha, 1.0 / 3.0):
        z = t**4 / 4.0
        s3 = math.sqrt(3.0)
        v = (
            pfq([7 / 12, 11 / 12], [1 / 2, 3 / 4], z, ctl)
            + 63.0 * s3 * t ** (8 / 3) * math.gamma(1 / 3) / (160.0 * math.pi)
            * pfq([1, 5 / 4, 19 / 12], [7 / 6, 17 / 12, 5 / 3], z, ctl)
            + 9.0 * s3 * t ** (4 / 3) * math.gamma(2 / 3) / (8.0 * math.pi)
            * pfq([11 / 12, 1, 5 / 4], [5 / 6, 13 / 12, 4 / 3], z, ctl)
        )
        return y0 * v.real
    raise InvalidArgumentError(f"no closed form implemented for alpha={alpha}")


def oracle_linear_t(alpha: float, y0, t: float, ctl: SeriesControl = DEFAULT_CONTROL, *, agree_tol=1e-10):
    """Solution of ``D^alpha y = t y``.

    Returns the general series value; for ``alpha`` in {1/2, 1/3, 1} the
    closed form is evaluated as well and both must agree to ``agree_tol``
    relative.
    """
    v = linear_t_series(alpha, y0, t, ctl)
    if any(math.isclose(alpha, a) for a in (0.5, 1.0 / 3.0, 1.0)):
        c = linear_t_closed_form(alpha, y0, t, ctl)
        if abs(v - c) > agree_tol * max(1.0, abs(c)):
            raise AccuracyError(f"series and closed form disagree at t={t}: {v!r} vs {c!r}", abs(v - c))
    return v


def pathsum_U(alpha: float, t: float, ctl: SeriesControl = DEFAULT_CONTROL, *, return_error=False):
    """Fundamental matrix ``U(t)`` of ``D^alpha U = [[1+t, -t], [1, 0]] U``, ``U(0) = I``.

    Each entry is a double series over ``(k, j)``, ``j`` counting loop
    traversals, with Gamma ratios formed by log-Gamma.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    if not alpha > 0:
        raise InvalidArgumentError("alpha must be positive")
    if t == 0:
        return (np.eye(2), 0.0) if return_error else np.eye(2)
    K = ctl.k_max
    k = np.arange(K, dtype=float)[:, None]
    j = np.arange(K, dtype=float)[None, :]
    g = 1.0 / (alpha + 1.0)
    lt = math.log(t)
    base = k * math.log(alpha + 1.0) + gammaln(k + g) - math.lgamma(g)

    def grid(shift):
        e = base - gammaln(k + (k + j + shift) * alpha + 1.0) + (alpha * (k + j + shift) + k) * lt
        return np.exp(e)

    g0, g1 = grid(0), grid(1)
    sums = []
    err = 0.0
    for arr, k0 in ((g0, 0), (g0, 1), (g1, 0), (g1, 1)):
        a = arr[k0:]
        s = math.fsum(a.ravel())
        edge = max(float(np.max(a[-1, :])), float(np.max(a[:, -1])))
        if edge > ctl.tol * max(abs(s), 1.0) and edge > 0:
            raise AccuracyError(f"path-sum double series not converged at t={t} (edge term {edge:.3e})", edge)
        err = max(err, edge)
        sums.append(s)
    U = np.array([[sums[0], -sums[1]], [sums[2], 1.0 - sums[3]]])
    return (U, err) if return_error else U
