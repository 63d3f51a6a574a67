import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from catenoid_lab.core.exceptions import DegenerateDirectionError, DomainError, NonHyperbolicError
from catenoid_lab.core.symbol import (
    characteristic_speeds,
    check_timelike,
    cylindrical_coefficients,
    cylindrical_symbol,
    gamma_bounds_check,
    graph_vector,
    hat_x0_margin,
    metric_from_gradient,
)
from catenoid_lab.models.models import SpacetimeVector

gradients = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
unit = st.floats(min_value=-0.95, max_value=0.95)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_flat_symbol_is_minkowski_on_the_plane():
    symbol = metric_from_gradient(graph_vector(0.0, 0.0, 0.0))
    assert symbol.hat_x0 == 0.0
    np.testing.assert_array_equal(symbol.T, np.zeros(3))
    np.testing.assert_allclose(symbol.gamma, np.diag([1.0, 1.0, 0.0]))


def test_sandwich_at_rest():
    symbol = metric_from_gradient(SpacetimeVector(x0=0.0, x_prime=(0.0, 0.0, 1.0)))
    assert gamma_bounds_check(symbol, [1.0, 0.0, 0.0]) == pytest.approx((1.0, 1.0, 1.0))


def test_sandwich_with_time_component():
    symbol = metric_from_gradient(SpacetimeVector(x0=0.5, x_prime=(0.0, 0.0, 1.0)))
    lower, value, upper = gamma_bounds_check(symbol, [0.0, 0.0, 1.0])
    assert lower == pytest.approx(0.0, abs=1e-15)
    assert value == pytest.approx(0.0, abs=1e-15)
    assert upper == pytest.approx(0.25)


def test_degenerate_direction():
    with pytest.raises(DegenerateDirectionError):
        metric_from_gradient(SpacetimeVector(x0=1.0, x_prime=(0.0, 0.0, 0.0)))


def test_sandwich_rejects_non_unit_direction():
    symbol = metric_from_gradient(graph_vector(0.1, 0.2, 0.3))
    with pytest.raises(DomainError):
        gamma_bounds_check(symbol, [1.0, 1.0, 0.0])


@settings(max_examples=300, deadline=None)
@given(gradients, gradients, unit, st.lists(gradients, min_size=4, max_size=4))
def test_completed_square_reconstructs_symbol(phi_x, phi_y, x0, xi):
    phi_t = x0 * np.sqrt(1.0 + phi_x ** 2 + phi_y ** 2)
    symbol = metric_from_gradient(graph_vector(phi_t, phi_x, phi_y))
    xi = np.asarray(xi)
    scale = max(float(xi @ xi), 1.0)
    assert abs(symbol.quadratic(xi) - symbol.completed_square(xi)) <= 1e-12 * scale


@settings(max_examples=300, deadline=None)
@given(gradients, gradients, unit, st.lists(gradients, min_size=3, max_size=3))
@example(0.0, 0.0, 5.2211022798211144e-158, [0.0, 0.0, 1.0])
def test_gamma_sandwich(phi_x, phi_y, x0, n):
    if np.linalg.norm(n) < 1e-3:
        return
    phi_t = x0 * np.sqrt(1.0 + phi_x ** 2 + phi_y ** 2)
    symbol = metric_from_gradient(graph_vector(phi_t, phi_x, phi_y))
    lower, value, upper = gamma_bounds_check(symbol, _unit(n))
    assert value - lower >= -1e-12
    assert upper - value >= -1e-12


def test_check_timelike():
    assert check_timelike([0.0, 0.0, 0.0]) == (True, 1.0)
    ok, slack = check_timelike([1.0, 0.0, 0.0])
    assert not ok and slack == 0.0
    ok, slack = check_timelike([0.5, 1.0, 0.0])
    assert ok and slack == pytest.approx(1.75 / 2.0)


def test_hat_x0_margin_matches_symbol():
    phi_t, phi_x, phi_y = 0.4, 0.3, -0.2
    symbol = metric_from_gradient(graph_vector(phi_t, phi_x, phi_y))
    _, slack = check_timelike([phi_t, phi_x, phi_y])
    assert hat_x0_margin(slack) == pytest.approx(1.0 - abs(symbol.hat_x0), rel=1e-12)


def test_speeds_at_rest_are_unit():
    symbol = metric_from_gradient(graph_vector(0.0, 0.0, 0.0))
    assert characteristic_speeds(symbol, [1.0, 0.0]) == (-1.0, 1.0)
    assert characteristic_speeds(symbol, [0.0, 1.0, 0.0]) == (-1.0, 1.0)


def test_speeds_need_unit_direction():
    symbol = metric_from_gradient(graph_vector(0.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        characteristic_speeds(symbol, [2.0, 0.0])


def test_speeds_are_roots_of_the_symbol():
    symbol = metric_from_gradient(graph_vector(0.3, 0.5, -0.4))
    n = _unit([0.6, 0.8, 0.0])
    for speed in characteristic_speeds(symbol, n):
        # xi = (-speed, n) is a null covector of the completed square
        assert symbol.completed_square(np.concatenate(([-speed], n))) == pytest.approx(0.0, abs=1e-12)


def test_cylindrical_symbol_at_rest():
    symbol, verdict = cylindrical_symbol(0.0, 0.0, 0.0)
    assert verdict
    assert (symbol.A, symbol.B, symbol.C, symbol.D, symbol.E, symbol.M) == (1.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    assert characteristic_speeds(symbol, [1.0, 0.0]) == (-1.0, 1.0)


def test_static_catenoid_profile_is_positive_definite():
    z = np.linspace(-4.0, 4.0, 401)
    for psi_z in np.sinh(z):
        _, verdict = cylindrical_symbol(0.0, float(psi_z), 0.0)
        assert verdict


def test_cylindrical_not_hyperbolic_when_time_derivative_dominates():
    symbol, verdict = cylindrical_symbol(1.5, 0.0, 0.0)
    assert not verdict
    with pytest.raises(NonHyperbolicError):
        characteristic_speeds(symbol, [1.0, 0.0])


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-0.9, max_value=0.9), gradients, gradients)
def test_cylindrical_determinant_identity(psi_t, psi_z, p):
    A, B, C, D, E, M = cylindrical_coefficients(psi_t, psi_z, p)
    lhs = M ** 4 * ((A + C ** 2) * (B + D ** 2) - (E - C * D) ** 2)
    rhs = M * (M - psi_t ** 2) ** 2
    assert float(abs(lhs - rhs) / rhs) < 1e-12


@pytest.mark.parametrize("z", [0.0, 1.0])
def test_speeds_along_the_static_neck(z):
    symbol, verdict = cylindrical_symbol(0.0, float(np.sinh(z)), 0.0)
    assert verdict
    minus, plus = characteristic_speeds(symbol, [1.0, 0.0])
    assert plus == pytest.approx(1.0 / np.cosh(z), rel=1e-14)
    assert minus == pytest.approx(-1.0 / np.cosh(z), rel=1e-14)


def test_sandwich_with_vanishing_shift():
    symbol = metric_from_gradient(graph_vector(5.2211022798211144e-158, 0.0, 0.0))
    lower, value, upper = gamma_bounds_check(symbol, [0.0, 0.0, 1.0])
    assert lower <= value <= upper
    assert lower == pytest.approx(0.0, abs=1e-15)
