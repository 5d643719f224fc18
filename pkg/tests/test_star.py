import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starfode.errors import AccuracyError, BranchError, InvalidArgumentError
from starfode.legendre import eval_basis, expand_function, gauss_legendre, make_basis
from starfode.star import (
    CoeffMatrix,
    FracPowerConfig,
    frac_power,
    mult_operator_matrix,
    star_coeff_matrix,
    theta_matrix,
    theta_power,
)
from starfode.star import _theta_power_cached


def _kernel_coeffs(basis, kernel_poly, n_outer=200):
    """Coefficients of ``k(t - s) Theta(t - s)`` by nested Gauss quadrature.

    The inner integral over ``s in [0, t]`` is polynomial, so a rule on each
    subinterval is exact; the outer rule then integrates a polynomial exactly.
    """
    m = basis.m
    qo = gauss_legendre(n_outer, 0.0, basis.T)
    ref = gauss_legendre(m + 4)
    inner = np.empty((qo.n, m))
    for i, t in enumerate(qo.nodes):
        s = 0.5 * t * (ref.nodes + 1.0)
        w = 0.5 * t * ref.weights
        inner[i] = (w * kernel_poly(t - s)) @ eval_basis(basis, s)
    return (eval_basis(basis, qo.nodes) * qo.weights[:, None]).T @ inner


def test_theta_one_by_one():
    np.testing.assert_allclose(theta_matrix(make_basis(2.0, 1)).entries, [[1.0]], atol=1e-15)


def test_theta_two_by_two():
    H = theta_matrix(make_basis(2.0, 2)).entries
    assert H[0, 0] == pytest.approx(1.0)
    assert H[0, 1] == pytest.approx(-1 / math.sqrt(3), abs=1e-15)
    assert H[1, 0] == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    assert H[1, 1] == 0.0


@pytest.mark.parametrize("T, m", [(1.0, 5), (2.0, 12), (0.3, 30)])
def test_theta_against_quadrature(T, m):
    b = make_basis(T, m)
    ref = _kernel_coeffs(b, lambda x: np.ones_like(x))
    assert np.max(np.abs(theta_matrix(b).entries - ref)) <= 1e-12


@pytest.mark.parametrize("m", [6, 20, 50])
def test_star_product_homomorphism(m):
    # Theta * Theta = (t - s) Theta(t - s); exact in truncation except the last entry
    b = make_basis(1.5, m)
    H = theta_matrix(b).entries
    ref = _kernel_coeffs(b, lambda x: x)
    D = np.abs(H @ H - ref)
    D[-1, -1] = 0.0
    assert D.max() <= 1e-10


@pytest.mark.parametrize("route", ["schur", "series"])
def test_power_one_and_zero(route):
    H = theta_matrix(make_basis(2.0, 10))
    cfg = FracPowerConfig(route=route)
    np.testing.assert_array_equal(frac_power(H, 1.0, cfg).entries, H.entries)
    np.testing.assert_array_equal(frac_power(H, 0.0, cfg).entries, np.eye(10))


def test_power_two_is_square():
    H = theta_matrix(make_basis(1.0, 7)).entries
    np.testing.assert_allclose(frac_power(H, 2.0), H @ H, atol=1e-15)


@pytest.mark.parametrize("m", [20, 50, 200])
@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_semigroup(m, alpha):
    H = theta_matrix(make_basis(1.0, m)).entries
    P = frac_power(H, alpha) @ frac_power(H, 1.0 - alpha)
    assert np.linalg.norm(P - H) / np.linalg.norm(H) <= 1e-8


def test_power_is_real_for_real_input():
    R = frac_power(theta_matrix(make_basis(2.0, 40)), 0.5).entries
    assert np.isrealobj(R)


def test_schur_vs_series_reference_case():
    H = theta_matrix(make_basis(2.0, 20))
    a = frac_power(H, 0.5).entries
    b = frac_power(H, 0.5, FracPowerConfig(route="series")).entries
    assert np.linalg.norm(a - b) / np.linalg.norm(a) <= 1e-8


def test_short_series_reports_nonconvergence():
    # the binomial series converges at the spectral radius of H/rho - I, close to 1
    H = theta_matrix(make_basis(2.0, 20))
    with pytest.raises(AccuracyError):
        frac_power(H, 0.5, FracPowerConfig(route="series", series_max=400))


@settings(max_examples=5)
@given(m=st.integers(4, 30), alpha=st.floats(0.05, 0.95), T=st.floats(0.5, 3.0))
def test_route_agreement(m, alpha, T):
    H = theta_matrix(make_basis(T, m))
    a = frac_power(H, alpha).entries
    b = frac_power(H, alpha, FracPowerConfig(route="series")).entries
    assert np.linalg.norm(a - b) / np.linalg.norm(a) <= 1e-8


def test_series_divergence_detected():
    H = theta_matrix(make_basis(1.0, 10)).entries
    with pytest.raises(AccuracyError):
        frac_power(H, 0.5, FracPowerConfig(route="series", rho=0.05))


def test_branch_cut_rejected():
    with pytest.raises(BranchError):
        frac_power(np.diag([1.0, -2.0]), 0.5)


@pytest.mark.parametrize("alpha", [-0.1, 2.5])
def test_alpha_range(alpha):
    with pytest.raises(InvalidArgumentError):
        frac_power(np.eye(2), alpha)


def test_theta_power_memoized_and_consistent():
    b = make_basis(1.0, 30)
    theta_power(b, 0.4)
    hits = _theta_power_cached.cache_info().hits
    theta_power(b, 0.4)
    assert _theta_power_cached.cache_info().hits == hits + 1
    np.testing.assert_allclose(theta_power(b, 0.4).entries, frac_power(theta_matrix(b), 0.4).entries, atol=1e-15)


@pytest.mark.parametrize("c", [1.0, -2.5, 0.0])
def test_mult_operator_constant(c):
    b = make_basis(2.0, 8)
    F = mult_operator_matrix(b, b.constant_coeffs(c)).entries
    np.testing.assert_allclose(F, c * np.eye(8), atol=1e-14)


def test_mult_operator_linear():
    b = make_basis(2.0, 4)
    F = mult_operator_matrix(b, expand_function(b, lambda t: t)).entries
    target = expand_function(b, lambda t: t * eval_basis(b, t)[..., 1]).beta
    np.testing.assert_allclose(F @ np.eye(4)[1], target, atol=1e-12)


def test_mult_operator_basis_mismatch():
    with pytest.raises(InvalidArgumentError):
        mult_operator_matrix(make_basis(1.0, 4), expand_function(make_basis(2.0, 4), lambda t: t))


def test_star_coeff_constant():
    b = make_basis(1.0, 12)
    Ha = theta_power(b, 0.6).entries
    np.testing.assert_allclose(star_coeff_matrix(b, -1.5, 0.6).entries, -1.5 * Ha, atol=0)
    np.testing.assert_array_equal(star_coeff_matrix(b, 0.0, 0.6).entries, np.zeros((12, 12)))


def test_star_coeff_integration():
    b = make_basis(1.0, 12)
    S = star_coeff_matrix(b, lambda t: 1.0 + 0 * t, 1.0).entries
    np.testing.assert_allclose(S, theta_matrix(b).entries, atol=1e-14)


def test_coeff_matrix_is_read_only():
    H = theta_matrix(make_basis(1.0, 3))
    with pytest.raises(ValueError):
        H.entries[0, 0] = 5.0
    assert isinstance(H @ H, CoeffMatrix)
