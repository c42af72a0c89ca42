import json
from pathlib import Path

import pytest

from convreach.cli import (ConfigError, EXIT_FAIL, EXIT_PASS, config_from_args,
                           build_parser, main, run, validate_config)

SCENARIO_PATH = str(Path(__file__).resolve().parents[1] / "scenario.json")


def _run_cli(argv, tmp_path):
    return main(argv + ["--out", str(tmp_path)])


def test_certify_ellipse_pass_exit_zero(tmp_path):
    code = _run_cli(["certify", "--fixture", "ellipse", "--r", "2.0"], tmp_path)
    assert code == EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["certificate"]["passed"] is True


def test_certify_fail_exit_two(tmp_path):
    code = _run_cli(["certify", "--fixture", "ellipse", "--r", "1.9"], tmp_path)
    assert code == EXIT_FAIL


def test_oracle_annulus_fail_with_witness(tmp_path):
    code = _run_cli(["oracle", "--fixture", "annulus", "--r", "5"], tmp_path)
    assert code == EXIT_FAIL
    report = json.loads((tmp_path / "report.json").read_text())
    assert "witness" in report["results"]["verdict"]


def test_pendulum_report_radius(tmp_path):
    code = _run_cli(["pendulum", "--omega", "1", "--gamma", "0.01", "--u", "0",
                     "--s", "0.4", "--t", "0.32"], tmp_path)
    assert code == EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["radius"] <= 1.24
    assert report["results"]["constants"]["l1"] <= 0.37


def test_pendulum_infeasible_exit_two(tmp_path):
    code = _run_cli(["pendulum", "--omega", "1", "--gamma", "0.01", "--u", "0",
                     "--s", "5.0", "--t", "0.32"], tmp_path)
    assert code == EXIT_FAIL


def test_max_radius_command(tmp_path):
    code = _run_cli(["max-radius", "--fixture", "disk"], tmp_path)
    assert code == EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["max_radius"] == pytest.approx(1.0, abs=1e-6)


def test_reach_command_with_svg(tmp_path):
    code = _run_cli(["reach", "--field", "rotation", "--center", "1", "0",
                     "--radius", "0.1", "--s", "0.1", "--t", "1.5707963",
                     "--steps", "256", "--svg"], tmp_path)
    assert code == EXIT_PASS
    svg = (tmp_path / "reach.svg").read_text()
    assert svg.lstrip().startswith("<?xml")
    assert 'version="1.1"' in svg


def test_abstraction_writes_csv(tmp_path):
    code = _run_cli(["abstraction", "--scenario", SCENARIO_PATH,
                     "--steps", "128"], tmp_path)
    assert code == EXIT_PASS
    rows = (tmp_path / "transitions.csv").read_text().strip().splitlines()
    assert rows[0] == "source,control,target"
    assert len(rows) > 1
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["transitions"]["spurious_eliminated"] >= 1


def test_report_determinism(tmp_path):
    args = ["oracle", "--fixture", "disk", "--r", "1.0", "--pairs", "100",
            "--seed", "5"]
    a_dir = tmp_path / "a"
    b_dir = tmp_path / "b"
    assert _run_cli(args, a_dir) == _run_cli(args, b_dir)
    a = json.loads((a_dir / "report.json").read_text())
    b = json.loads((b_dir / "report.json").read_text())
    a.pop("wall_clock_s")
    b.pop("wall_clock_s")
    assert a == b


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 1, "oracle": {"fixture": "disk", "r": 0.9,
                                                     "pairs": 150}}))
    code = main(["oracle", "--config", str(cfg), "--r", "1.0",
                 "--out", str(tmp_path)])
    assert code == EXIT_PASS  # r overridden to the passing radius
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["r"] == 1.0
    assert report["config"]["oracle"]["pairs"] == 150  # file value preserved


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError):
        validate_config({"command": "oracle", "nonsense": True})
    with pytest.raises(ConfigError):
        validate_config({"command": "oracle", "oracle": {"fixture": "disk",
                                                         "r": 1.0, "typo": 2}})


def test_bad_config_exit_one(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"oracle": {"r": -1.0}}))
    assert main(["oracle", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_unknown_fixture_errors(tmp_path):
    assert main(["oracle", "--fixture", "nope", "--r", "1.0",
                 "--out", str(tmp_path)]) == 1


def test_inline_polynomial_config(tmp_path):
    # ellipse as an inline polynomial: x^2 + 4 y^2 - 1 <= 0
    cfg = tmp_path / "poly.json"
    cfg.write_text(json.dumps({
        "certify": {
            "polynomials": [[[1.0, 2, 0], [4.0, 0, 2], [-1.0, 0, 0]]],
            "box": {"lo": [-1.5, -1.5], "hi": [1.5, 1.5]},
            "r": 2.0,
        }
    }))
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS
    assert main(["certify", "--config", str(cfg), "--r", "1.9",
                 "--out", str(tmp_path)]) == EXIT_FAIL


def test_tolerances_surfaced_through_config(tmp_path):
    cfg = tmp_path / "tol.json"
    # a huge inequality slack makes the failing disk certificate pass
    cfg.write_text(json.dumps({
        "tolerances": {"inequality": 0.5},
        "certify": {"fixture": "disk", "r": 0.9},
    }))
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS


def test_reach_linear_field_from_config(tmp_path):
    cfg = tmp_path / "lin.json"
    cfg.write_text(json.dumps({
        "reach": {"field": "linear", "matrix": [[0.0, -1.0], [1.0, 0.0]],
                  "center": [1.0, 0.0], "radius": 0.1, "s": 0.1, "t": 0.5,
                  "steps": 128, "directions": 8},
    }))
    assert main(["reach", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    # rotation field: M2 = 0, lambda_+/- = 0, so r = s exactly
    assert report["results"]["radius"] == pytest.approx(0.1, rel=1e-9)
    assert report["caveats"] == []


def test_exit_code_contract_over_fixture_matrix(tmp_path):
    # (command args, expected exit code)
    matrix = [
        (["certify", "--fixture", "disk", "--r", "1.0"], EXIT_PASS),
        (["certify", "--fixture", "disk", "--r", "0.9"], EXIT_FAIL),
        (["certify", "--fixture", "annulus"], EXIT_FAIL),
        (["certify", "--fixture", "quartic"], EXIT_PASS),
        (["oracle", "--fixture", "ellipse", "--r", "2.1", "--pairs", "200"], EXIT_PASS),
        (["oracle", "--fixture", "cross3d", "--r", "1.0", "--pairs", "100"], EXIT_FAIL),
    ]
    for k, (args, expected) in enumerate(matrix):
        out = tmp_path / f"m{k}"
        assert _run_cli(args, out) == expected, args
