from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppwave.acceptance import jacobian_fd_errors
from ppwave.delta_nets import DEFAULT_SCHEDULE
from ppwave.errors import DomainError, PreconditionError
from ppwave.transform import (TransformEvaluator, TransformFamily, leading_minors, principal_minors, s_closed,
                              t_closed, t_eps)


def test_closed_form_hand_value(saddle):
    np.testing.assert_allclose(t_closed(saddle, (1.0, 2.0, 3.0, 0.0)), (1.0, 4.0, 0.0, 8.0))


def test_closed_form_identity_before_wave(saddle):
    p = (-0.3, 2.0, 3.0, 1.0)
    np.testing.assert_array_equal(t_closed(saddle, p), p)
    np.testing.assert_array_equal(s_closed(saddle, p), p)


@settings(max_examples=30, deadline=None)
@given(X=st.floats(-3, 3), Y1=st.floats(-3, 3), Y2=st.floats(-3, 3))
def test_closed_boundary_collapse(saddle, X, Y1, Y2):
    a = t_closed(saddle, (1.0, X, Y1, 0.0))[1:3]
    b = t_closed(saddle, (1.0, X, Y2, 0.0))[1:3]
    assert np.array_equal(a, b)
    assert a[1] == 0.0


def test_eps_transform_approaches_closed_form(saddle, bump):
    gaps = [np.abs(t_eps(TransformEvaluator(saddle, bump, e), (1.0, 2.0, 3.0, 0.0))
                   - np.array([1.0, 4.0, 0.0, 8.0])).max() for e in DEFAULT_SCHEDULE]
    assert np.all(np.diff(gaps) < 0) and gaps[-1] < 2e-2


@pytest.mark.parametrize("eps", [0.1, 0.0125])
def test_identity_below_layer(saddle, bump, eps):
    ev = TransformEvaluator(saddle, bump, eps)
    P = np.array([[-eps, 0.3, 0.2, 1.0], [-0.7, -0.5, 0.9, -2.0]])
    np.testing.assert_array_equal(ev.t_batch(P), P)
    np.testing.assert_array_equal(ev.s_batch(P), P)
    np.testing.assert_array_equal(ev.jacobian_batch(P), np.broadcast_to(np.eye(4), (2, 4, 4)))


def test_t_minus_s_is_the_delta_integral(saddle, bump):
    ev = TransformEvaluator(saddle, bump, 0.05)
    P = np.array([[0.01, 0.4, -0.3, 0.2], [0.5, 1.0, 0.5, 0.0]])
    w, A = ev.w_parts_batch(P)
    d = ev.t_batch(P) - ev.s_batch(P)
    np.testing.assert_allclose(d[:, :3], 0.0, atol=0.0)
    np.testing.assert_allclose(d[:, 3], A, atol=1e-14)


def test_diagonal_point_has_t_equal_s(saddle, bump):
    ev = TransformEvaluator(saddle, bump, 0.0125)
    p = (1.0, 1.0, 1.0, 0.0)
    w, A = ev.w_parts(p)
    assert w == pytest.approx(2.0, abs=2e-2)
    assert abs(A) < 2e-2


@settings(max_examples=20, deadline=None)
@given(c=st.floats(-5, 5), U=st.floats(-1, 1), X=st.floats(-1, 1), Y=st.floats(-1, 1))
def test_affine_in_V(saddle, bump, c, U, X, Y):
    ev = TransformEvaluator(saddle, bump, 0.05)
    a = ev.t_eps((U, X, Y, 0.0))
    b = ev.t_eps((U, X, Y, c))
    np.testing.assert_array_equal(b[:3], a[:3])
    assert b[3] - a[3] == pytest.approx(c, abs=1e-12)


def test_jacobian_against_finite_differences(saddle, bump, rng):
    ev = TransformEvaluator(saddle, bump, 0.05)
    P = rng.uniform(-0.5, 0.5, size=(50, 4))
    assert jacobian_fd_errors(ev, P).max() < 1e-4


def test_jacobian_quartic_finite_differences(quartic, bump, rng):
    ev = TransformEvaluator(quartic, bump, 0.05, box=((-1, 1), (-1, 1)))
    P = rng.uniform(-0.5, 0.5, size=(20, 4))
    assert jacobian_fd_errors(ev, P).max() < 1e-4


def test_minor_structure(saddle, bump, rng):
    ev = TransformEvaluator(saddle, bump, 0.05)
    J = ev.jacobian_batch(rng.uniform(-0.5, 0.5, size=(30, 4)))
    lm = leading_minors(J)
    assert np.all(lm[:, 0] == 1.0)
    np.testing.assert_allclose(lm[:, 3], J[:, 1, 1] * J[:, 2, 2] - J[:, 1, 2] * J[:, 2, 1], atol=1e-12)
    pm = principal_minors(J)
    assert pm.shape == (30, 15)
    np.testing.assert_allclose(pm[:, -1], np.linalg.det(J), atol=1e-14)


def test_caustic_at_unit_U(saddle, bump):
    ev = TransformEvaluator(saddle, bump, 0.0125)
    assert abs(ev.jacobian((1.0, 0.3, 0.2, 0.0)).spatial_det) < 5e-2


def test_cache_reuses_sweeps(saddle, bump):
    ev = TransformEvaluator(saddle, bump, 0.05)
    U = np.linspace(-0.2, 1.0, 40)
    P = np.column_stack([U, np.full(40, 0.3), np.full(40, -0.1), np.zeros(40)])
    first = ev.t_batch(P)
    assert ev.cache_info() == 1
    np.testing.assert_array_equal(ev.t_batch(P), first)
    np.testing.assert_array_equal(ev.t_batch(P, use_cache=False), first)


def test_domain_and_precondition_errors(quartic, bump, saddle):
    with pytest.raises(DomainError):
        TransformEvaluator(quartic, bump, 0.1, box=((-2, 2), (-2, 2)))
    ev = TransformEvaluator(saddle, bump, 0.05, box=((-1, 1), (-1, 1)))
    with pytest.raises(DomainError):
        ev.t_eps((0.0, 1.5, 0.0, 0.0))
    with pytest.raises(PreconditionError):
        TransformEvaluator(saddle, bump, 0.05, steps_per_eps=8)


def test_family_admissible(quartic, bump):
    fam = TransformFamily(quartic, bump, DEFAULT_SCHEDULE)
    assert fam.admissible(((-2, 2), (-2, 2))) == (0.0125,)
