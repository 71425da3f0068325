"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import math

import pytest

from ppwave import acceptance

# collected here and echoed in the terminal summary by conftest
RESULTS: dict[int, str] = {}


def _report(result):
    RESULTS[result.number] = result.line()
    print("\n" + result.line())
    for k, v in result.details.items():
        print(f"    {k}: {v}")


def test_criterion_01_strict_delta_nets():
    r = acceptance.criterion_1()
    _report(r)
    for kind in ("bump", "cosine_squared"):
        d = r.details[kind]
        assert d["support_violations"] == 0
        assert max(d["mass_errors"]) < 1e-10
        assert d["l1_ratio_minus_1"] < 1e-8
    assert r.details["runtime"] < 1.0
    assert r.passed


def test_criterion_02_geodesic_limit():
    r = acceptance.criterion_2()
    _report(r)
    xe, ve = r.details["x_errors"], r.details["v_errors"]
    assert all(b < a for a, b in zip(xe, xe[1:])) and all(b < a for a, b in zip(ve, ve[1:]))
    assert xe[-1] < 1e-2 and ve[-1] < 1e-2
    assert r.details["runtime"] < 5.0
    assert r.passed


def test_criterion_03_jacobian_consistency():
    r = acceptance.criterion_3()
    _report(r)
    assert r.details["n_points"] == 100
    assert r.details["max_rel_error"] < 1e-4
    assert r.details["first_minor_exact"]
    assert r.details["det_vs_spatial"] < 1e-12
    assert r.passed


def test_criterion_04_minor_certificate():
    r = acceptance.criterion_4()
    _report(r)
    assert r.details["eta"] >= 0.2
    assert r.details["eps0"] >= 0.0125
    assert r.details["worst_minor_deviation"] < 0.5
    assert r.passed


def test_criterion_05_injectivity_regions():
    r = acceptance.criterion_5()
    _report(r)
    assert max(r.details["envelope_rel_error"].values()) < 1e-3
    assert r.details["eps"] == 0.0125
    hits = r.details["collisions"]
    assert {h[1] for h in hits} == {(2.0, 2.0), (-2.0, -2.0)}
    assert all(math.hypot(*h[0]) < 0.25 and h[2] < 1e-2 for h in hits)
    assert r.passed


def test_criterion_06_convergence_tables():
    r = acceptance.criterion_6()
    _report(r)
    for key in ("s_sup", "dU_sup"):
        s = r.details[key]
        assert all(b <= 1.1 * a for a, b in zip(s, s[1:]))
        assert s[-1] < 1e-2
    assert r.details["runtime"] < 60.0
    assert r.passed


def test_criterion_07_pullback():
    r = acceptance.criterion_7()
    _report(r)
    last = r.details["rows"][-1]
    assert last["eps"] == 0.0125
    assert last["gap"] < 1e-2
    assert r.details["entry_gap"] < 1e-2
    assert r.details["dU_row_max"] < 1e-2
    assert r.passed


def test_criterion_08_inversion_round_trip():
    r = acceptance.criterion_8()
    _report(r)
    assert r.details["gamma"] > 0 and r.details["delta"] > 0 and r.details["eta"] > 0
    assert max(r.details["round_trip"].values()) < 1e-6
    assert max(r.details["composition_Q"]) < 1e-8
    assert max(r.details["composition_A"]) < 1e-8
    assert r.passed


def test_criterion_09_stability_instance():
    r = acceptance.criterion_9()
    _report(r)
    assert r.details["doubled_past_delta"]["hypotheses_ok"] is False
    assert r.passed


def test_criterion_10_growth_orders():
    r = acceptance.criterion_10()
    _report(r)
    assert r.details["one"] == pytest.approx(0.0, abs=0.05)
    assert r.details["delta"] == pytest.approx(-1.0, abs=0.05)
    assert r.details["eps_squared"] == pytest.approx(2.0, abs=0.05)
    assert r.passed
