from __future__ import annotations

import numpy as np
import pytest

from ppwave.delta_nets import DEFAULT_SCHEDULE
from ppwave.errors import NonConvergenceError
from ppwave.inversion import (Ball, CylinderSet, OpenBox, build_inversion_data, composition_residuals,
                              generic_newton, newton_invert, newton_invert_batch, round_trip, s_closed_inverse,
                              stability_check, translation_instance)
from ppwave.profiles import flat_profile
from ppwave.transform import TransformEvaluator, TransformFamily, s_closed_batch


@pytest.fixture(scope="module")
def saddle_data(saddle_family, saddle):
    return build_inversion_data(saddle_family, saddle, (0.0, 1.0, 1.0, 0.0), ((0.0, 2.0), (0.0, 2.0)),
                                1.0, (-4.0, 4.0))


def test_regions():
    b = Ball(np.zeros(2), 1.0)
    assert b.margin([[0.5, 0.0]])[0] == pytest.approx(0.5)
    assert np.all(b.margin(b.closed_samples(9)) >= -1e-12)
    eb = b.expanded(0.5, 0.5)
    assert eb.contains([[1.4, 0.0]])[0] and not eb.contains([[1.6, 0.0]])[0]
    cyl = CylinderSet(np.zeros(4), 1.0, 0.5)
    assert cyl.contains([[0.0, 0.5, 0.5, 0.4]])[0] and not cyl.contains([[0.0, 0.0, 0.0, 0.6]])[0]
    assert cyl.expanded(0.1, 0.2).half_height == pytest.approx(0.7)
    with pytest.raises(ValueError):
        CylinderSet(np.zeros(4), 0.0, 1.0)
    box = OpenBox(np.array([-1.0, 0.0, 0.0, -4.0]), np.array([0.5, 2.0, 2.0, 4.0]))
    assert box.violated([[0.0, 1.0, 2.5, 0.0]]) == ["Y"]


def test_translation_instance_passes():
    r = stability_check(translation_instance(0.5))
    assert r.hypotheses_ok and r.inclusion_ok and r.y_ok and r.margin > 0


def test_zero_perturbation_margin():
    r = stability_check(translation_instance(0.5, shift=0.0))
    assert r.hypotheses_ok and r.inclusion_ok
    assert r.sup_hat == 0.0 and r.margin == pytest.approx(0.5)


def test_large_perturbation_gates_conclusion():
    r = stability_check(translation_instance(0.5, shift=1.0))
    assert r.hypotheses_ok is False and r.inclusion_ok is None


def test_generic_newton_solves_cubic():
    g = lambda x: np.column_stack([x[:, 0] ** 3 + x[:, 0], x[:, 1]])  # noqa: E731
    x, res = generic_newton(g, np.array([[2.0, 1.0]]), np.array([[0.5, 0.0]]))
    np.testing.assert_allclose(x, [[1.0, 1.0]], atol=1e-10)
    assert res[0] < 1e-12


def test_closed_inverse_round_trip(saddle, rng):
    P = np.column_stack([rng.uniform(-0.5, 0.5, 50), rng.uniform(0, 2, (50, 2)), rng.uniform(-1, 1, 50)])
    Z = s_closed_batch(saddle, P)
    P2, res = s_closed_inverse(saddle, Z, seed=P + 0.05)
    np.testing.assert_allclose(P2, P, atol=1e-10)


def test_newton_identity_and_origin(saddle, bump):
    ev = TransformEvaluator(saddle, bump, 0.05)
    assert newton_invert(ev, (-0.5, 1.0, 2.0, 3.0)) == (-0.5, 1.0, 2.0, 3.0)
    assert newton_invert(ev, (0.0, 0.0, 0.0, 0.0)) == (0.0, 0.0, 0.0, 0.0)


def test_newton_round_trip(saddle, bump, rng):
    ev = TransformEvaluator(saddle, bump, 0.025)
    P = rng.uniform(-0.5, 0.5, size=(40, 4))
    Pi, res, ok = newton_invert_batch(ev, ev.t_batch(P), seed=P + 0.01)
    assert np.all(ok)
    np.testing.assert_allclose(Pi, P, atol=1e-9)


def test_newton_refuses_unreachable_target(quartic, bump):
    # beyond the fold of X - X^3 U on [-1, 1] there is no preimage in the box
    ev = TransformEvaluator(quartic, bump, 0.0125, box=((-1, 1), (-1, 1)))
    with pytest.raises(NonConvergenceError) as exc:
        newton_invert(ev, (1.0, 2.0, 0.0, 0.0), seed=(1.0, 0.5, 0.0, 0.0))
    assert exc.value.last_iterate is not None


def test_saddle_inversion_data(saddle_data):
    d = saddle_data
    assert d.Q.radius_spatial > 0 and d.Q.half_height > 0
    assert d.P.gamma <= d.alpha
    assert d.eps0 in DEFAULT_SCHEDULE.values
    assert d.certified_eps == DEFAULT_SCHEDULE.below(d.eps0)
    assert all(d.reports[e]["hypotheses_ok"] and d.reports[e]["inclusion_ok"] and d.reports[e]["inverse_in_P"]
               for e in d.certified_eps)
    assert np.allclose(d.anchor_q, (0.0, 1.0, 1.0, 0.0))


def test_saddle_round_trip_and_composition(saddle_data, saddle, rng):
    rt = round_trip(saddle_data, saddle, rng, 100)
    assert max(rt.values()) < 1e-6
    comp = composition_residuals(saddle_data, saddle)
    assert comp.max_on_Q < 1e-8 and comp.max_on_A < 1e-8


def test_flat_profile_inversion(bump, rng):
    f = flat_profile()
    fam = TransformFamily(f, bump, DEFAULT_SCHEDULE)
    d = build_inversion_data(fam, f, (0.0, 1.0, 1.0, 0.0), ((0.0, 2.0), (0.0, 2.0)), 1.0, (-4.0, 4.0))
    assert d.eps0 == max(DEFAULT_SCHEDULE)
    comp = composition_residuals(d, f)
    assert comp.max_on_Q == 0.0 and comp.max_on_A == 0.0
    assert max(round_trip(d, f, rng, 50).values()) == 0.0
