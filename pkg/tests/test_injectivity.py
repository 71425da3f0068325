from __future__ import annotations

import math

import numpy as np
import pytest

from ppwave.delta_nets import DEFAULT_SCHEDULE
from ppwave.injectivity import (check_property_E, find_collisions, injectivity_region, minor_certificate,
                                minor_deviation_profile, sampled_envelope)
from ppwave.profiles import flat_profile
from ppwave.transform import TransformEvaluator, TransformFamily

K1 = ((-1.0, 1.0), (-1.0, 1.0))
K2 = ((-2.0, 2.0), (-2.0, 2.0))


def _rays(r_max=2.0):
    r = np.linspace(0.05, r_max, 30)
    th = np.linspace(0.0, 2 * np.pi, 11, endpoint=False)
    return np.outer(r, np.cos(th)), np.outer(r, np.sin(th))


@pytest.mark.parametrize("name", ["quadratic_saddle", "quartic_negative"])
def test_sampled_envelope_matches_analytic(name, saddle, quartic):
    f = saddle if name == "quadratic_saddle" else quartic
    X, Y = _rays()
    hs = sampled_envelope(f, X, Y)
    np.testing.assert_allclose(hs, f.envelope(X, Y), rtol=1e-3)
    # nondecreasing along every ray
    assert np.all(np.diff(hs, axis=0) >= -1e-12)


def test_regions(saddle, quartic):
    W = injectivity_region(saddle)
    assert W.analytic
    assert W.contains(0.99, 5.0, -3.0) and not W.contains(1.0, 0.0, 0.0)
    Wq = injectivity_region(quartic, b_cap=2.0)
    assert Wq.upper(1.0, 0.0) == pytest.approx(1.0 / 3.0)
    assert Wq.upper(0.0, 0.0) == 2.0
    Wf = injectivity_region(flat_profile(), prefer_analytic=False)
    assert not Wf.analytic
    assert Wf.upper(3.0, 4.0) == math.inf and Wf.contains(100.0, 3.0, 4.0)
    assert not Wf.contains(-3.0, 0.0, 0.0)


def test_closed_form_saddle_collides_at_caustic(saddle):
    hits = find_collisions(saddle, 1.0, K1, n_grid=17)
    assert hits and all(abs(h.a[0] - h.b[0]) < 1e-9 for h in hits)
    assert find_collisions(saddle, 0.9, K1, n_grid=17) == []


def test_quartic_collapsing_triple(quartic, bump):
    ev = TransformEvaluator(quartic, bump, 0.0125, box=K2)
    hits = find_collisions(ev, 0.25, K2, image_tol=1e-2, anchors=[(2.0, 2.0), (-2.0, -2.0)],
                           seeds=[(0.0, 0.0), (0.0, 0.0)])
    assert len(hits) == 2
    for h in hits:
        assert math.hypot(*h.a) < 0.25 and h.image_gap < 1e-2
    # the limit map sends the whole triple to the origin
    from ppwave.transform import spatial_closed
    np.testing.assert_allclose(spatial_closed(quartic, 0.25, [[2, 2], [-2, -2], [0, 0]]), 0.0, atol=1e-15)


def test_quartic_unanchored_scan_finds_collisions(quartic, bump):
    ev = TransformEvaluator(quartic, bump, 0.0125, box=K2)
    assert find_collisions(ev, 0.25, K2, n_grid=25)


def test_flat_profile_never_collides(bump):
    fam = TransformFamily(flat_profile(), bump, DEFAULT_SCHEDULE)
    rep = check_property_E(fam, K1, (0.9, 0.5), n_grid=9, n_u=3)
    assert rep.alpha == 0.9 and rep.eps0 == 0.1 and rep.collisions == []


def test_minor_deviation_zero_below_layer(saddle_family):
    ev = saddle_family.evaluator(0.05)
    assert np.all(minor_deviation_profile(ev, K1, [-1.0, -0.5, -0.05], n_grid=9) == 0.0)


def test_minor_certificates(saddle_family):
    big = minor_certificate(saddle_family, K1, 0.5)
    assert big.certified and big.eta >= 0.2 and big.eps0 >= 0.0125 and big.worst_minor_deviation < 0.5
    small = minor_certificate(saddle_family, K1, 0.1)
    assert small.certified and small.eta <= 0.1


def test_minor_certificate_rejects_bad_delta(saddle_family):
    with pytest.raises(ValueError):
        minor_certificate(saddle_family, K1, 1.5)


def test_property_E_saddle_and_consistency(saddle_family):
    rep = check_property_E(saddle_family, K1, (0.9, 0.7, 0.5), n_grid=17, n_u=6)
    assert rep.certified and rep.alpha >= 0.5
    cert = minor_certificate(saddle_family, K1, 0.5)
    # sufficiency direction: a certified minor slab has no collisions
    for eps in DEFAULT_SCHEDULE.below(cert.eps0):
        assert find_collisions(saddle_family.evaluator(eps), cert.eta, K1, n_grid=17) == []
