from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppwave.errors import ConfigurationError
from ppwave.profiles import builtin_profile, flat_profile, metric_continuous, metric_regularized

from conftest import polynomial_profile_xy_plus_x2

coord = st.floats(-2.0, 2.0)


@pytest.mark.parametrize("name", ["quadratic_saddle", "quartic_negative"])
@settings(max_examples=25, deadline=None)
@given(X=coord, Y=coord)
def test_derivatives_match_finite_differences(name, X, Y):
    f = builtin_profile(name)
    h = 1e-5
    g_fd = [(f.eval(X + h, Y) - f.eval(X - h, Y)) / (2 * h), (f.eval(X, Y + h) - f.eval(X, Y - h)) / (2 * h)]
    np.testing.assert_allclose(f.grad(X, Y), g_fd, atol=1e-6)
    H_fd = np.stack([(f.grad(X + h, Y) - f.grad(X - h, Y)) / (2 * h),
                     (f.grad(X, Y + h) - f.grad(X, Y - h)) / (2 * h)], axis=-1)
    np.testing.assert_allclose(f.hess(X, Y), H_fd, atol=1e-6)
    T_fd = np.stack([(f.hess(X + h, Y) - f.hess(X - h, Y)) / (2 * h),
                     (f.hess(X, Y + h) - f.hess(X, Y - h)) / (2 * h)], axis=-1)
    np.testing.assert_allclose(f.third(X, Y), T_fd, atol=1e-5)


def test_profiles_vectorize(saddle, quartic):
    X = np.linspace(-1, 1, 7)
    for f in (saddle, quartic):
        assert f.eval(X, X).shape == (7,)
        assert f.grad(X, X).shape == (7, 2)
        assert f.hess(X, X).shape == (7, 2, 2)
        assert f.third(X, X).shape == (7, 2, 2, 2)


def test_unknown_profile():
    with pytest.raises(ConfigurationError) as exc:
        builtin_profile("sextic")
    assert exc.value.field == "profile"


def test_continuous_metric_flat_before_wave(saddle):
    g = metric_continuous(saddle, (-0.3, 0.5, 0.2, 1.0))
    assert g["XX"] == 1.0 and g["YY"] == 1.0 and g["XY"] == 0.0 and g["UV"] == -0.5


def test_continuous_metric_saddle_values(saddle):
    g = metric_continuous(saddle, (0.5, 0.3, 0.4, 0.0))
    assert (g["XX"], g["YY"], g["XY"], g["UV"]) == pytest.approx((2.25, 0.25, 0.0, -0.5))
    assert g.is_symmetric()


@settings(max_examples=30, deadline=None)
@given(U=st.floats(0.0, 1.5), X=coord, Y=coord)
def test_continuous_spatial_block_is_pullback_of_euclidean(U, X, Y):
    # the spatial map X -> X + grad f U/2 pulls dX^2 + dY^2 back to J^T J
    f = polynomial_profile_xy_plus_x2()
    J = np.eye(2) + 0.5 * U * f.hess(X, Y)
    expect = J.T @ J
    g = metric_continuous(f, (U, X, Y, 0.0))
    assert g["XX"] == pytest.approx(expect[0, 0], rel=1e-12, abs=1e-12)
    assert g["YY"] == pytest.approx(expect[1, 1], rel=1e-12, abs=1e-12)
    assert g["XY"] == pytest.approx(expect[0, 1], rel=1e-12, abs=1e-12)


def test_mixed_entry_quarter_coefficient():
    # f = XY + X^2: f12 = 1, Laplacian 2, so g_XY = U + U^2/2 at U > 0
    g = metric_continuous(polynomial_profile_xy_plus_x2(), (1.0, 0.0, 0.0, 0.0))
    assert g["XY"] == pytest.approx(1.5)


def test_regularized_metric(saddle, bump):
    g = metric_regularized(saddle, bump, 0.1, (0.0, 1.0, 0.0, 0.0))
    assert g["UU"] == pytest.approx(float(bump.delta(0.1, 0.0)))
    assert metric_regularized(saddle, bump, 0.1, (0.2, 1.0, 0.0, 0.0))["UU"] == 0.0
    assert g["UV"] == -0.5 and g["XX"] == 1.0


def test_flat_profile_is_zero():
    f = flat_profile()
    assert float(f.eval(1.0, 2.0)) == 0.0
    assert np.all(f.hess(1.0, 2.0) == 0.0)


def test_hand_values(saddle, quartic):
    assert float(saddle.eval(2.0, 3.0)) == -5.0
    np.testing.assert_array_equal(saddle.grad(2.0, 3.0), (4.0, -6.0))
    np.testing.assert_array_equal(quartic.grad(1.0, 1.0), (-2.0, -2.0))


def test_metric_degenerates_at_caustic(saddle):
    assert metric_continuous(saddle, (1.0, 0.4, -0.2, 0.0))["YY"] == 0.0


def test_regularized_uu_at_layer_centre(saddle, bump):
    g = metric_regularized(saddle, bump, 0.05, (0.0, 2.0, 3.0, 0.0))
    assert g["UU"] == pytest.approx(-5.0 * float(bump.delta(0.05, 0.0)))
    assert g["VV"] == 0.0
