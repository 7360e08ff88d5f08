import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uinfc.clf import abs_clf
from uinfc.errors import ParameterError, ResourceError
from uinfc.infconv import (
    SOLVER_FLOOR,
    check_prox_subgradient,
    check_sandwich,
    lemma1_radius,
    minimize_envelope,
    moreau_envelope,
    reference_envelope,
)

from conftest import X0


def huber(x, alpha):
    """Moreau envelope of |.| in closed form."""
    a2 = alpha * alpha
    return x * x / (2 * a2) if abs(x) <= a2 else abs(x) - a2 / 2


# ---------------------------------------------------------------- moreau_envelope


def test_abs_exact_huber(absv):
    res = moreau_envelope(absv, [1.0], 0.5)
    assert res.y_eps[0] == pytest.approx(0.75, abs=1e-8)
    assert res.envelope_value == pytest.approx(0.875, abs=1e-9)
    assert res.zeta[0] == pytest.approx(1.0, abs=1e-7)
    assert res.eps_achieved <= SOLVER_FLOOR + 1e-15


def test_origin_is_its_own_minimizer(absv, endi):
    for clf, n in ((absv, 1), (endi, 5)):
        res = moreau_envelope(clf, np.zeros(n), 0.3)
        np.testing.assert_allclose(res.y_eps, 0.0, atol=1e-9)
        assert res.envelope_value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(res.zeta, 0.0, atol=1e-6)


def test_endi_x0_against_dense_reference(endi):
    res = moreau_envelope(endi, X0, 0.1, 1e-6, seed=3)
    ref = reference_envelope(endi, X0, 0.1, 1e-3)
    assert ref - 1e-9 <= res.envelope_value <= ref + 1e-6
    assert 0.5e-6 <= res.eps_achieved <= 1e-6


def test_endi_x0_exact_frozen(endi):
    # closed form is unavailable; value frozen from the dense reference at h = 1e-3
    res = moreau_envelope(endi, X0, 0.1, 0.0)
    assert res.envelope_value == pytest.approx(reference_envelope(endi, X0, 0.1, 1e-3), abs=1e-8)


def test_alpha_validation(absv):
    for a in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ParameterError):
            moreau_envelope(absv, [1.0], a)
    with pytest.raises(ParameterError):
        moreau_envelope(absv, [1.0], 0.5, eps_target=-1.0)


def test_zeta_definition(endi):
    res = moreau_envelope(endi, X0, 0.1, 1e-4, seed=1)
    np.testing.assert_array_equal(res.zeta, (X0 - res.y_eps) / (0.1 * 0.1))


def test_deterministic_given_seed(endi):
    a = moreau_envelope(endi, X0, 0.1, 1e-3, seed=9)
    b = moreau_envelope(endi, X0, 0.1, 1e-3, seed=9)
    np.testing.assert_array_equal(a.y_eps, b.y_eps)


@given(st.floats(-2.0, 2.0), st.floats(0.05, 0.95), st.floats(1e-7, 1e-2), st.integers(0, 2**31))
@settings(max_examples=150, deadline=None)
def test_injection_calibration_abs(x, alpha, eps, seed):
    clf = abs_clf()
    res = moreau_envelope(clf, [x], alpha, eps, seed=seed)
    true = huber(x, alpha)
    gap = res.envelope_value - true
    assert 0.5 * eps - 1e-9 <= gap <= eps + 1e-9
    assert 0.5 * eps <= res.eps_achieved <= eps
    assert abs(res.y_eps[0] - x) <= lemma1_radius(clf, [x], alpha) + 1e-12


@given(st.floats(-2.0, 2.0), st.floats(0.05, 0.95))
@settings(max_examples=100, deadline=None)
def test_exact_mode_dominated_by_V(x, alpha):
    clf = abs_clf()
    res = moreau_envelope(clf, [x], alpha, 0.0)
    assert res.envelope_value <= abs(x) + SOLVER_FLOOR
    assert res.envelope_value == pytest.approx(huber(x, alpha), abs=1e-9)


def test_injection_calibration_endi(endi):
    rng = np.random.default_rng(2)
    for k, x in enumerate(rng.uniform(-0.6, 0.6, size=(30, 5))):
        eps = 10.0 ** rng.uniform(-7, -2)
        res = moreau_envelope(endi, x, 0.1, eps, seed=k)
        assert 0.5 * eps <= res.eps_achieved <= eps
        assert np.linalg.norm(res.y_eps - x) <= lemma1_radius(endi, x, 0.1)


def test_warm_start_does_not_hurt(endi):
    cold = moreau_envelope(endi, X0, 0.1, 0.0)
    warm = moreau_envelope(endi, X0, 0.1, 0.0, warm_start=cold.y_eps)
    assert warm.envelope_value <= cold.envelope_value + 1e-12


def test_minimize_without_gradient_uses_coordinates():
    clf = abs_clf()
    plain = type(clf)(**{**clf.__dict__, "gradient": None, "values": None})
    y, f = minimize_envelope(plain, np.array([1.0]), 0.5)
    assert f == pytest.approx(0.875, abs=1e-9)


# ---------------------------------------------------------------- reference_envelope


def test_reference_huber(absv):
    assert reference_envelope(absv, [1.0], 0.5, 1e-4) == pytest.approx(0.875, abs=1e-4)
    assert reference_envelope(absv, [0.0], 0.5) == 0.0


def test_reference_monotone_in_grid_step(endi):
    vals = [reference_envelope(endi, X0, 0.1, h) for h in (1e-2, 1e-3, 1e-4)]
    assert vals[0] >= vals[1] >= vals[2]


def test_reference_monotone_in_alpha(absv):
    vals = [reference_envelope(absv, [0.7], a, 1e-4) for a in (0.1, 0.3, 0.6, 0.9)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_reference_resource_guard(absv):
    with pytest.raises(ResourceError):
        reference_envelope(absv, [1.0], 0.5, 1e-12)


# ---------------------------------------------------------------- sandwich and prox


def test_sandwich_examples(absv):
    assert check_sandwich(absv, [1.0], 0.5, 0.2)
    assert check_sandwich(absv, [0.0], 0.5, 0.2)
    assert not check_sandwich(absv, [1.0], 0.5, 0.1)


def test_sandwich_eps1_validation(absv):
    with pytest.raises(ParameterError):
        check_sandwich(absv, [1.0], 0.5, 0.0)


def test_prox_examples(absv):
    res = moreau_envelope(absv, [1.0], 0.5)
    probes = np.linspace(-3, 3, 601)[:, None]
    assert check_prox_subgradient(absv, res, [1.0], probes)
    assert check_prox_subgradient(absv, res, [1.0], res.y_eps[None, :])
    bad = type(res)(**{**res.__dict__, "zeta": res.zeta + 1.0})
    assert not check_prox_subgradient(absv, bad, [1.0], probes)


def test_prox_equality_at_y(endi):
    res = moreau_envelope(endi, X0, 0.1)
    assert check_prox_subgradient(endi, res, X0, res.y_eps[None, :], tol=0.0)


def test_lemma1_radius_grows_outside_working_ball(absv):
    inside = lemma1_radius(absv, [0.5], 0.2)
    far = lemma1_radius(absv, [50.0], 0.2)
    assert inside == pytest.approx(math.sqrt(2 * absv.v_bar) * 0.2)
    assert far == pytest.approx(math.sqrt(100.0) * 0.2)
