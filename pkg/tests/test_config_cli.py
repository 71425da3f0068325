from __future__ import annotations

import csv
import json

import pytest

from ppwave.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from ppwave.config import ExperimentConfig, config_from_dict, load_config
from ppwave.errors import ConfigurationError


def test_defaults_validate():
    cfg = load_config(None)
    assert cfg == ExperimentConfig()
    assert tuple(cfg.schedule()) == pytest.approx((0.1, 0.05, 0.025, 0.0125))


def test_round_trip_through_json(tmp_path):
    cfg = config_from_dict({"profile": "quartic_negative", "eps": {"start": 0.0125, "ratio": 0.5, "count": 3},
                            "injectivity": {"K": [[-2, 2], [-2, 2]], "collision_U": 0.25}, "seed": 7})
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert load_config(path) == cfg


@pytest.mark.parametrize("doc,field", [
    ({"eps": {"ratio": 2.0}}, "eps.ratio"),
    ({"eps": {"count": 2}}, "eps.count"),
    ({"profile": "sextic"}, "profile"),
    ({"net": "gaussian"}, "net"),
    ({"steps_per_eps": 8}, "steps_per_eps"),
    ({"tolerances": {"round_trip": 0.0}}, "tolerances.round_trip"),
    ({"inversion": {"bogus": 1}}, "inversion.bogus"),
    ({"region": [[1, 0]] * 4}, "region"),
])
def test_validation_names_field(doc, field):
    with pytest.raises(ConfigurationError) as exc:
        config_from_dict(doc)
    assert exc.value.field == field


def test_bad_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(p)


def test_cli_delta_check(tmp_path):
    assert main(["delta-check", "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "delta_check.csv")))
    assert [r["eps"] for r in rows][0] == "0.10000000000000001"
    assert all(float(r["mass_error"]) < 1e-10 for r in rows)
    echoed = load_config(tmp_path / "effective_config.json")
    assert echoed == ExperimentConfig()


def test_cli_validation_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"eps": {"start": 0.1, "ratio": 1.5, "count": 4}}))
    assert main(["delta-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_VALIDATION
    assert "eps.ratio" in capsys.readouterr().err


def test_cli_domain_error_is_validation(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"profile": "quartic_negative",
                               "transform": {"points": [[0.5, 2.0, 2.0, 0.0]], "jacobian": False}}))
    assert main(["transform", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_cli_numerical_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"tolerances": {"delta_mass": 1e-30}}))
    assert main(["delta-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("cmd", ["geodesic", "transform", "pullback"])
def test_cli_deterministic_and_thread_independent(tmp_path, cmd):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"transform": {"random_points": 5}, "seed": 3}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([cmd, "--config", str(cfg), "--out", str(a)]) == EXIT_OK
    assert main([cmd, "--config", str(cfg), "--out", str(b), "--threads", "3"]) == EXIT_OK
    assert _files(a) == _files(b)


def test_cli_seed_changes_random_points(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"transform": {"random_points": 3, "jacobian": False}}))
    main(["transform", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["transform", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "transform.csv").read_bytes() != (tmp_path / "b" / "transform.csv").read_bytes()
    assert load_config(tmp_path / "b" / "effective_config.json").seed == 2


def test_cli_geodesic_columns(tmp_path):
    main(["geodesic", "--out", str(tmp_path)])
    header = (tmp_path / "geodesic_3.csv").read_text().splitlines()[0]
    assert header == "u,x1,x2,v,xdot1,xdot2"


def test_cli_injectivity_json(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"injectivity": {"n_grid": 9, "alpha_search": [0.9, 0.5]}}))
    assert main(["injectivity", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    doc = json.loads((tmp_path / "o" / "injectivity.json").read_text())
    assert doc["minor_certificate"]["eta"] >= 0.2
    assert doc["property_E"]["alpha"] == 0.9


def test_cli_accept_defaults(tmp_path):
    assert main(["accept", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "acceptance.json").read_text())
    assert [c["number"] for c in doc["criteria"]] == list(range(1, 11))
    assert all(c["passed"] for c in doc["criteria"])


def test_cli_accept_failure_exit_code(tmp_path, monkeypatch):
    from ppwave import acceptance
    from ppwave.cli import EXIT_ACCEPTANCE

    failing = lambda seed=0: acceptance.CriterionResult(99, "forced failure", False, 0.0)  # noqa: E731
    monkeypatch.setattr(acceptance, "CRITERIA", (acceptance.criterion_9, failing))
    assert main(["accept", "--out", str(tmp_path)]) == EXIT_ACCEPTANCE
