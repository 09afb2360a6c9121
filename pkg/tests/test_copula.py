import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jointsurv import FirmParams, RngStream
from jointsurv.copula import (
    bivariate_upper,
    compare_models,
    copula_first_order,
    copula_joint_equicorrelated,
    copula_joint_general,
    thresholds_from_survival,
)
from jointsurv.firm_model import CorrelationError, equicorrelation_matrix
from jointsurv.numerics import std_normal_sf

from . import oracles

SWEEP_XI = [0.1, 0.2, 0.3, 0.4, 0.5]
SWEEP_SAFE = [0.842, 0.849, 0.858, 0.867, 0.877]
SWEEP_RISKY = [0.534, 0.563, 0.591, 0.619, 0.648]
# one-factor integral by scipy adaptive quadrature
ORACLE_SAFE_03 = 0.8576726998949015

TABLE2 = [
    (0.30, 0.20, -1.81, 0.0697, 0.0717),
    (0.30, 0.30, -1.14, 0.611, 0.636),
    (0.30, 0.40, -0.636, 2.06, 2.17),
    (0.35, 0.20, -1.38, 0.223, 0.231),
    (0.35, 0.30, -0.789, 1.08, 1.13),
    (0.35, 0.40, -0.343, 2.71, 2.87),
]


def test_thresholds_examples():
    assert thresholds_from_survival([0.5]).chi[0] == pytest.approx(0.0, abs=1e-15)
    assert thresholds_from_survival([0.965]).chi[0] == pytest.approx(-1.81, abs=0.005)
    assert thresholds_from_survival([0.872]).chi[0] == pytest.approx(-1.14, abs=0.005)


@given(st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=6))
def test_thresholds_round_trip(p):
    th = thresholds_from_survival(p)
    assert np.allclose(std_normal_sf(th.chi), p, rtol=0, atol=1e-10)
    assert np.allclose(th.chi, math.sqrt(2) * np.array([oracles.erfinv(1 - 2 * x) for x in p]), atol=1e-9)


@given(st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_thresholds_decreasing(p, dp):
    a, b = thresholds_from_survival([p, p + dp]).chi
    assert b < a


@pytest.mark.parametrize("p", [0.0, 1.0, 1.2])
def test_thresholds_domain(p):
    with pytest.raises(ValueError):
        thresholds_from_survival([p])


def test_equicorrelated_examples():
    chi = [-1.8102] * 5
    assert copula_joint_equicorrelated(chi, 0.0) == pytest.approx(0.965**5, abs=0.001)
    assert copula_joint_equicorrelated(chi, 0.0) == pytest.approx(0.837, abs=0.001)
    assert copula_joint_equicorrelated(chi, 0.3) == pytest.approx(0.858, abs=0.001)
    assert copula_joint_equicorrelated(chi, 0.3) == pytest.approx(ORACLE_SAFE_03, abs=1e-10)
    assert copula_joint_equicorrelated([-1.1383] * 5, 0.5) == pytest.approx(0.648, abs=0.001)


@pytest.mark.parametrize("chi, expected", [(-1.8102, SWEEP_SAFE), (-1.1383, SWEEP_RISKY)])
def test_sweeps(chi, expected):
    got = [copula_joint_equicorrelated([chi] * 5, xi) for xi in SWEEP_XI]
    assert np.allclose(got, expected, atol=0.001)


@given(st.floats(-2.5, 0.5), st.integers(2, 6), st.floats(0.0, 0.9))
def test_equicorrelated_matches_scipy(chi, n, xi):
    assert copula_joint_equicorrelated([chi] * n, xi) == pytest.approx(oracles.one_factor_copula(chi, xi, n), abs=1e-9)


@pytest.mark.parametrize("chi", [-1.8102, -1.1383, -0.3])
def test_monotone_in_xi(chi):
    vals = [copula_joint_equicorrelated([chi] * 5, xi) for xi in np.linspace(0, 0.5, 11)]
    assert np.all(np.diff(vals) > 0)


def test_equicorrelated_errors():
    with pytest.raises(CorrelationError):
        copula_joint_equicorrelated([-1.0] * 3, 1.0)
    with pytest.raises(CorrelationError):
        copula_joint_equicorrelated([-1.0] * 3, -0.6)


def test_negative_xi_uses_monte_carlo():
    chi = [-1.0, -1.2, -0.8]
    v = copula_joint_equicorrelated(chi, -0.2, rng=RngStream(5))
    ref, err = copula_joint_general(chi, equicorrelation_matrix(3, -0.2), RngStream(5))
    assert v == ref
    assert v < copula_joint_equicorrelated(chi, 0.0)


def test_general_identity_and_single():
    chi = np.array([-1.0, -0.5, -1.5])
    v, err = copula_joint_general(chi, np.eye(3), RngStream(1))
    assert err > 0
    assert abs(v - np.prod(std_normal_sf(chi))) < 3 * err
    assert copula_joint_general([-0.7], np.eye(1)) == (std_normal_sf(-0.7), 0.0)


def test_general_matches_one_factor():
    chi = [-1.1383] * 5
    v, err = copula_joint_general(chi, equicorrelation_matrix(5, 0.3), RngStream(2))
    assert abs(v - copula_joint_equicorrelated(chi, 0.3)) < 3 * err


def test_general_reproducible():
    chi, m = [-1.0, -0.9], equicorrelation_matrix(2, 0.4)
    a = copula_joint_general(chi, m, RngStream(3), pairs=200_000)
    assert a == copula_joint_general(chi, m, RngStream(3), pairs=200_000)
    assert a != copula_joint_general(chi, m, RngStream(4), pairs=200_000)


def test_general_rejects_bad_matrix():
    with pytest.raises(CorrelationError):
        copula_joint_general([-1.0, -1.0], [[1.0, 1.2], [1.2, 1.0]])
    with pytest.raises(CorrelationError):
        copula_joint_general([-1.0, -1.0], np.eye(3))


@given(st.floats(-2, 1), st.floats(-2, 1), st.floats(-0.95, 0.95))
def test_bivariate_upper(a, b, rho):
    from scipy import stats

    # P(X > a, Y > b) = P(-X < -a, -Y < -b)
    ref = stats.multivariate_normal([0, 0], [[1, rho], [rho, 1]]).cdf([-a, -b])
    assert bivariate_upper(a, b, rho) == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("chi, expected, tol", [(-1.8102, 0.0717, 0.0005), (-1.1383, 0.636, 0.003)])
def test_first_order_examples(chi, expected, tol):
    # survival taken from the threshold itself; the printed percentages are rounded
    p = float(std_normal_sf(chi))
    assert copula_first_order([p, p], [chi, chi], 0.3) / (0.3 * 0.09) == pytest.approx(expected, abs=tol)
    assert copula_first_order([p, p], [chi, chi], 0.0) == 0.0


@pytest.mark.parametrize("chi", [-1.8102, -1.1383, -0.5])
def test_first_order_is_derivative(chi):
    n, xi = 5, 0.01
    p = float(std_normal_sf(chi))
    p0 = copula_joint_equicorrelated([chi] * n, 0.0)
    slope = (copula_joint_equicorrelated([chi] * n, xi) - p0) / xi
    assert slope == pytest.approx(copula_first_order([p] * n, [chi] * n, 1.0) * p0, rel=0.02)


def test_first_order_matrix_form():
    p = np.array([0.9, 0.8, 0.95])
    th = thresholds_from_survival(p)
    m = np.array([[1, 0.2, 0.1], [0.2, 1, -0.3], [0.1, -0.3, 1]])
    g = np.exp(-0.5 * th.chi**2) / p
    expected = 2 * (0.2 * g[0] * g[1] + 0.1 * g[0] * g[2] - 0.3 * g[1] * g[2]) / (4 * math.pi)
    assert copula_first_order(p, th, m) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("sigma, d, chi, a_fp, a_c", TABLE2)
def test_compare_models_table(sigma, d, chi, a_fp, a_c):
    c = compare_models([FirmParams("X", sigma, d)], 0.3, 5.0)
    assert c.chi[0] == pytest.approx(chi, abs=0.005)
    assert c.a_fp_over_sigma2 == pytest.approx(a_fp, rel=0.015)
    assert c.a_c_over_sigma2 == pytest.approx(a_c, rel=0.005)
    assert c.a_c > c.a_fp and c.relative_gap > 0


def test_compare_models_independent_of_xi_and_n():
    f = FirmParams("X", 0.30, 0.40)
    a = compare_models([f], 0.1, 5.0)
    b = compare_models([f] * 4, 0.25, 5.0)
    assert a.a_fp == pytest.approx(b.a_fp, rel=1e-12)
    assert a.a_c == pytest.approx(b.a_c, rel=1e-12)
    with pytest.raises(ValueError):
        compare_models([f], 0.0, 5.0)
