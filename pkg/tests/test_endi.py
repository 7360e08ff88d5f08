import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uinfc.endi import (
    DEFAULT_GRID,
    ThetaGrid,
    endi_bracket,
    endi_clf_gradient,
    endi_clf_value,
    endi_nonsmooth_distance,
    endi_theta_star,
    f_tilde,
    grad_f_tilde,
    kappa_ni,
    v_tilde,
)
from uinfc.validate import f_tilde_grid_min

from conftest import X0

phis = st.tuples(*[st.floats(-2.0, 2.0)] * 3).map(np.array)


def test_f_tilde_values():
    assert f_tilde([1.0, 0.0, 0.0], 0.7) == 1.0
    assert f_tilde([0.0, 0.0, 0.0], 1.3) == 0.0
    assert f_tilde([3.0, 4.0, 1.0], math.atan2(4, 3)) == pytest.approx(17.0, abs=1e-12)


def test_grad_f_tilde_values():
    np.testing.assert_allclose(grad_f_tilde([1.0, 0.0, 0.0], 0.0), [2.0, 0.0, -2.0])
    np.testing.assert_array_equal(grad_f_tilde([0.0, 0.0, 0.0], 2.0), [0.0, 0.0, 0.0])


def _fd_grad(phi, theta, h=1e-6):
    phi = np.asarray(phi, dtype=float)
    return np.array([(f_tilde(phi + h * e, theta) - f_tilde(phi - h * e, theta)) / (2 * h) for e in np.eye(3)])


def test_grad_f_tilde_finite_differences():
    phi = [0.5, -1.0, 0.3]
    np.testing.assert_allclose(grad_f_tilde(phi, 1.0), _fd_grad(phi, 1.0), atol=1e-6)


@given(phis, st.floats(0.0, 2 * math.pi))
def test_grad_f_tilde_fd_property(phi, theta):
    np.testing.assert_allclose(grad_f_tilde(phi, theta), _fd_grad(phi, theta), atol=1e-6)


def test_kappa_values():
    np.testing.assert_array_equal(kappa_ni([0.0, 0.0, 0.0], 0.4), [0.0, 0.0])
    np.testing.assert_allclose(kappa_ni([1.0, 0.0, 0.0], 0.0), [-2.0, 2.0])


@given(phis, st.floats(0.0, 2 * math.pi))
def test_kappa_is_negated_directional_derivative(phi, theta):
    h = 1e-6
    g1 = np.array([1.0, 0.0, -phi[1]])
    g2 = np.array([0.0, 1.0, phi[0]])
    fd = [-(f_tilde(phi + h * g, theta) - f_tilde(phi - h * g, theta)) / (2 * h) for g in (g1, g2)]
    np.testing.assert_allclose(kappa_ni(phi, theta), fd, atol=1e-5)


def test_v_tilde_values():
    assert v_tilde([3.0, 4.0, 1.0]) == pytest.approx(17.0, abs=1e-12)
    assert v_tilde([0.0, 0.0, 0.0]) == 0.0


def test_v_tilde_matches_grid_min():
    rng = np.random.default_rng(3)
    for phi in rng.uniform(-1.5, 1.5, size=(1000, 3)):
        assert abs(v_tilde(phi) - f_tilde_grid_min(phi)) <= 1e-6


@given(phis)
def test_v_tilde_lower_bound_identity(phi):
    rho = math.hypot(phi[0], phi[1])
    lower = (rho - abs(phi[2])) ** 2 + phi[2] ** 2
    assert v_tilde(phi) == pytest.approx(lower, abs=1e-9)
    assert lower >= 0


def test_clf_value_at_origin_and_on_kappa():
    assert endi_clf_value(np.zeros(5)) == 0.0
    phi = np.array([0.4, -0.3, 0.2])
    th = math.atan2(phi[1], phi[0]) if phi[2] > 0 else math.atan2(-phi[1], -phi[0])
    x = np.concatenate([phi, kappa_ni(phi, th)])
    assert endi_clf_value(x) == pytest.approx(v_tilde(phi), abs=1e-10)


def test_clf_value_x0_against_denser_grid():
    dense = ThetaGrid.uniform(640, 40)
    assert endi_clf_value(X0) == pytest.approx(endi_clf_value(X0, dense), abs=1e-5)


def test_clf_value_x0_frozen():
    # dense-grid (2e6 angles) minimum of the bracket at the case-study initial state
    assert endi_clf_value(X0) == pytest.approx(3.05347308205735, abs=1e-10)


def test_clf_min_property():
    rng = np.random.default_rng(4)
    for x in rng.uniform(-1, 1, size=(50, 5)):
        v = endi_clf_value(x)
        assert all(v <= endi_bracket(x, t) + 1e-12 for t in DEFAULT_GRID.points)
        assert v > 0


def test_theta_star_smallest_on_ties():
    # on phi1 = phi2 = 0 with eta = 0 the bracket is constant in theta
    th, _ = endi_theta_star(np.array([0.0, 0.0, 0.3, 0.0, 0.0]))
    assert th == 0.0


def test_gradient_matches_fd_at_regular_point():
    x = np.array([0.3, -0.4, 0.5, 0.2, -0.1])
    h = 1e-6
    fd = np.array([(endi_clf_value(x + h * e) - endi_clf_value(x - h * e)) / (2 * h) for e in np.eye(5)])
    np.testing.assert_allclose(endi_clf_gradient(x), fd, atol=1e-5)


def test_nonsmooth_distance():
    assert endi_nonsmooth_distance([3.0, 4.0, 0.5, 0, 0]) == 0.5
    assert endi_nonsmooth_distance([0.3, 0.4, 2.0, 0, 0]) == pytest.approx(0.5)


def test_theta_grid_validation():
    with pytest.raises(ValueError):
        ThetaGrid(np.arange(4) * 0.1)
    with pytest.raises(ValueError):
        ThetaGrid(np.linspace(0, 7, 16))
