import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from starfode.errors import AccuracyError, DomainError, InvalidArgumentError
from starfode.special import (
    SeriesControl,
    gen_mittag_leffler,
    linear_t_closed_form,
    linear_t_series,
    mittag_leffler,
    oracle_autonomous,
    oracle_linear_t,
    pathsum_U,
    pfq,
)

mp.mp.dps = 40


def ml_mp(alpha, beta, z):
    return complex(mp.nsum(lambda k: mp.mpf(z) ** k / mp.gamma(alpha * k + beta), [0, mp.inf])) \
        if np.isrealobj(z) else complex(mp.nsum(lambda k: mp.mpc(z) ** k / mp.gamma(alpha * k + beta), [0, mp.inf]))


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0, 2.5])
def test_ml_at_zero(alpha):
    assert mittag_leffler(alpha, 0.0) == 1.0


@pytest.mark.parametrize(
    "alpha, z, expected",
    [(1.0, 1.0, math.e), (2.0, -1.0, math.cos(1.0)), (1.0, -2.0, math.exp(-2.0))],
)
def test_ml_identities(alpha, z, expected):
    assert mittag_leffler(alpha, z) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("x", np.linspace(0.0, 5.0, 20))
def test_ml_exp_and_cos_grid(x):
    assert abs(mittag_leffler(1.0, x) - math.exp(x)) <= 1e-12 * math.exp(x)
    assert abs(mittag_leffler(2.0, -x * x) - math.cos(x)) <= 1e-12


@pytest.mark.parametrize(
    "alpha, z",
    [(0.5, -1.0), (0.7, -2 ** 0.7), (0.3, 2.0), (1.5, 3 + 2j), (0.9, -0.5j)],
)
def test_ml_against_mpmath(alpha, z):
    ref = ml_mp(alpha, 1, z)
    v, err = mittag_leffler(alpha, z, return_error=True)
    assert abs(v - ref) <= max(1e-14 * abs(ref), err)
    assert abs(v - ref) <= 1e-12 * max(1.0, abs(ref))


@pytest.mark.parametrize("alpha, z", [(0.5, -5.0), (0.8, -8.0), (0.6, -6 + 3j), (1.0, -12.0)])
def test_ml_error_estimate_covers_cancellation(alpha, z):
    # alternating terms far larger than the value: digits are lost, the estimate must say so
    ref = ml_mp(alpha, 1, z)
    v, err = mittag_leffler(alpha, z, return_error=True)
    assert abs(v - ref) <= err


def test_ml_catastrophic_cancellation_is_reported():
    # exp(-30) ~ 1e-13 while the largest term is ~ 1e12
    with pytest.raises(AccuracyError):
        mittag_leffler(1.0, -30.0)


@pytest.mark.parametrize("alpha, z", [(0.2, 3.7 + 3j), (0.2, 3j), (0.1, 10.0)])
def test_ml_unrepresentable_values_raise(alpha, z):
    # E_alpha grows like exp(z^(1/alpha)); overflow or total cancellation must not pass silently
    with pytest.raises(AccuracyError):
        mittag_leffler(alpha, z)


def test_ml_domain_cap():
    with pytest.raises(DomainError):
        mittag_leffler(0.5, 31.0)
    with pytest.raises(InvalidArgumentError):
        mittag_leffler(0.0, 1.0)


def test_gen_ml_examples():
    assert gen_mittag_leffler(1.0, 2.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-15)
    assert gen_mittag_leffler(0.6, 2.5, 0.0) == pytest.approx(1 / math.gamma(2.5), rel=1e-15)


@settings(max_examples=30)
@given(alpha=st.floats(0.5, 2.0), x=st.floats(-3.0, 3.0), y=st.floats(-3.0, 3.0))
def test_gen_ml_beta_one_matches_ml(alpha, x, y):
    z = complex(x, y)
    a, ea = mittag_leffler(alpha, z, return_error=True)
    b, eb = gen_mittag_leffler(alpha, 1.0, z, return_error=True)
    assert abs(a - b) <= 4 * (ea + eb) + 1e-15 * abs(a)


@pytest.mark.parametrize("alpha, beta, z", [(0.5, 1.5, -1.2), (0.8, 2.3, 2.0 + 1j), (1.2, 0.7, -3.0)])
def test_gen_ml_against_mpmath(alpha, beta, z):
    ref = ml_mp(alpha, beta, z)
    assert abs(gen_mittag_leffler(alpha, beta, z) - ref) <= 1e-13 * max(1.0, abs(ref))


def test_pfq_examples():
    assert pfq([], [], 1.0) == pytest.approx(math.e, rel=1e-15)
    assert pfq([0.7], [0.7], -1.3) == pytest.approx(math.exp(-1.3), rel=1e-14)
    assert pfq([1, 1], [2], 0.5) == pytest.approx(2 * math.log(2), rel=1e-15)


@pytest.mark.parametrize(
    "a, b, z",
    [
        ([5 / 6], [2 / 3], 1 / 3),
        ([1, 4 / 3], [7 / 6, 3 / 2], 8 / 3),
        ([7 / 12, 11 / 12], [1 / 2, 3 / 4], 4.0),
        ([1, 5 / 4, 19 / 12], [7 / 6, 17 / 12, 5 / 3], 2.5),
        ([0.5, 1.5], [2.5], 0.9),
        ([0.3], [1.1, 2.2], -6 + 1j),
    ],
)
def test_pfq_against_mpmath(a, b, z):
    ref = complex(mp.hyper(a, b, z))
    assert abs(pfq(a, b, z) - ref) <= 1e-13 * abs(ref)


def test_pfq_polynomial_case():
    # a nonpositive integer upper parameter truncates the series
    assert pfq([-2, 1], [1], 5.0) == pytest.approx(1 - 2 * 5 + 25, rel=1e-15)


@pytest.mark.parametrize(
    "a, b, z, exc",
    [([1], [0], 0.5, InvalidArgumentError), ([1, 1, 1], [1], 0.5, DomainError), ([1, 1], [2], 1.0, DomainError)],
)
def test_pfq_errors(a, b, z, exc):
    with pytest.raises(exc):
        pfq(a, b, z)


def test_oracle_autonomous_examples():
    assert oracle_autonomous(0.7, -1.0, 2.5, 0.0) == 2.5
    assert oracle_autonomous(1.0, -1.0, 2.0, 1.0) == pytest.approx(2 * math.exp(-1), rel=1e-15)
    ref = mp.fsum(mp.mpf(-(2 ** 0.7)) ** k / mp.gamma(0.7 * k + 1) for k in range(400))
    assert abs(oracle_autonomous(0.7, -1.0, 1.0, 2.0) - float(ref)) <= 1e-13


def test_oracle_linear_t_examples():
    assert oracle_linear_t(0.5, 3.0, 0.0) == 3.0
    assert oracle_linear_t(1.0, 2.0, 1.0) == pytest.approx(2 * math.exp(0.5), rel=1e-14)
    assert abs(linear_t_series(0.5, 1.0, 1.0) - linear_t_closed_form(0.5, 1.0, 1.0)) <= 1e-10


@pytest.mark.parametrize("alpha", [0.5, 1 / 3, 1.0])
def test_linear_t_dual_formulas(alpha):
    for t in np.linspace(0.0, 1.5, 20):
        s = linear_t_series(alpha, 1.0, t)
        c = linear_t_closed_form(alpha, 1.0, t)
        assert abs(s - c) <= 1e-10 * max(1.0, abs(c))


def test_linear_t_closed_form_unavailable():
    with pytest.raises(InvalidArgumentError):
        linear_t_closed_form(0.7, 1.0, 1.0)


def test_pathsum_identity_at_zero():
    np.testing.assert_array_equal(pathsum_U(0.5, 0.0), np.eye(2))


def _ivp_fundamental(t_end):
    rhs = lambda t, y: (np.array([[1 + t, -t], [1.0, 0.0]]) @ y.reshape(2, 2)).ravel()
    sol = solve_ivp(rhs, (0, t_end), np.eye(2).ravel(), method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[:, -1].reshape(2, 2)


@pytest.mark.parametrize("t", [0.5, 1.0])
def test_pathsum_classical_limit(t):
    assert np.max(np.abs(pathsum_U(1.0, t) - _ivp_fundamental(t))) <= 1e-8


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_pathsum_leading_order(alpha):
    # U22 - 1 = -t^(2a+1) / Gamma(2a+2) (1 + c1 t^a + c2 t^(2a) + ...); Richardson removes c1, c2
    t0 = 1e-3
    p = 2 * alpha + 1
    c = [(pathsum_U(alpha, t0 * 2**i)[1, 1] - 1.0) / (t0 * 2**i) ** p for i in range(3)]
    for level in (1, 2):
        r = 2 ** (level * alpha)
        c = [(r * c[i] - c[i + 1]) / (r - 1) for i in range(len(c) - 1)]
    expected = -1.0 / math.gamma(2 * alpha + 2)
    assert abs(c[0] / expected - 1.0) <= 1e-4


def test_pathsum_truncation_reported():
    with pytest.raises(AccuracyError):
        pathsum_U(0.5, 2.0, SeriesControl(k_max=8))


def _resum_check(fn, err_fn):
    v, e = err_fn(SeriesControl())
    v2 = fn(SeriesControl(tol=1e-16))
    assert abs(v - v2) <= 10 * e + 1e-300


@settings(max_examples=50)
@given(alpha=st.floats(0.5, 1.5), r=st.floats(0.0, 3.0), phi=st.floats(-3.1, 3.1))
def test_ml_resum_property(alpha, r, phi):
    z = r * complex(math.cos(phi), math.sin(phi))
    _resum_check(lambda c: mittag_leffler(alpha, z, c), lambda c: mittag_leffler(alpha, z, c, return_error=True))


@settings(max_examples=50)
@given(a=st.floats(0.1, 3.0), b=st.floats(0.1, 3.0), c=st.floats(0.2, 3.0), z=st.floats(-0.9, 0.9))
def test_pfq_resum_property(a, b, c, z):
    _resum_check(lambda ctl: pfq([a, b], [c], z, ctl), lambda ctl: pfq([a, b], [c], z, ctl, return_error=True))


@settings(max_examples=50)
@given(alpha=st.floats(0.3, 1.0), t=st.floats(0.0, 1.5))
def test_linear_t_resum_property(alpha, t):
    _resum_check(lambda c: linear_t_series(alpha, 1.0, t, c), lambda c: linear_t_series(alpha, 1.0, t, c, return_error=True))
