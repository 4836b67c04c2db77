import json
import os

import numpy as np
import pytest

from anosovlab.cli import main


def fleet_arg(name):
    from importlib import resources
    return str(resources.files("anosovlab").joinpath(f"fleet/{name}.json"))


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_reports_certificate(capsys):
    code, out, _ = run(capsys, ["verify", fleet_arg("a3_gen1")])
    assert code == 0
    rep = json.loads(out)
    assert rep["map"] == "a3_gen1"
    assert rep["certificate"]["expansion_lb"] > 1.0
    assert rep["certificate"]["contraction_ub"] < 1.0


def test_periodic_counts_and_artifacts(capsys, tmp_path):
    out_dir = str(tmp_path / "art")
    code, out, _ = run(capsys, ["periodic", fleet_arg("a3_linear"),
                                "--max-period", "3", "--out", out_dir])
    assert code == 0
    rep = json.loads(out)
    assert rep["orbit_counts"] == {"1": 1, "2": 3, "3": 10}
    assert os.path.exists(os.path.join(out_dir, "periodic.json"))


def test_special_exit_codes_and_determinism(capsys):
    code1, out1, _ = run(capsys, ["special", fleet_arg("a3_special"),
                                  "--seed", "7"])
    code2, out2, _ = run(capsys, ["special", fleet_arg("a3_special"),
                                  "--seed", "7"])
    assert code1 == code2 == 0
    assert out1 == out2                      # byte-identical reports
    assert json.loads(out1)["verdict"] == "Special"


def test_malformed_spec_exits_one(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "linear": [[3, 1], [1, 1]],
                               "perturbations": []}))
    code, _, err = run(capsys, ["verify", str(bad)])
    assert code == 1
    rep = json.loads(err)
    assert rep["error"] == "SpecFileError"
    assert "perturbations" in rep["message"]


def test_rho_report(capsys):
    code, out, _ = run(capsys, ["rho", fleet_arg("a3_linear"),
                                "--x", "0.3,0.4", "--sep", "0.01"])
    assert code == 0
    rep = json.loads(out)
    assert rep["rho_xy"] == pytest.approx(1.0, abs=1e-10)
    assert rep["affine_distance"] == pytest.approx(0.01, rel=1e-6)


def test_classify_cli_not_conjugate(capsys):
    code, out, _ = run(capsys, ["classify", fleet_arg("a3_gen1"),
                                fleet_arg("a3_detuned"), "--max-period", "1"])
    assert code == 0
    rep = json.loads(out)
    assert rep["verdict"] == "NotConjugate"


def test_pipeline_config_schema(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"subcommand": "verify",
                               "inputs": [fleet_arg("a3_linear")],
                               "bogus_key": 1}))
    code, _, err = run(capsys, ["pipeline", str(cfg)])
    assert code == 1
    assert "bogus_key" in err

    cfg.write_text(json.dumps({"inputs": [fleet_arg("a3_linear")]}))
    code, _, err = run(capsys, ["pipeline", str(cfg)])
    assert code == 1
    assert "subcommand" in err

    cfg.write_text(json.dumps({"subcommand": "verify",
                               "inputs": [fleet_arg("a3_linear")]}))
    code, out, _ = run(capsys, ["pipeline", str(cfg)])
    assert code == 0
    assert json.loads(out)["map"] == "a3_linear"


def test_access_special_map(capsys):
    code, out, _ = run(capsys, ["access", fleet_arg("a3_linear"),
                                "--src", "0.1,0.1", "--dst", "0.7,0.3"])
    assert code == 0
    rep = json.loads(out)
    assert rep["verdict"] == "Special"
    assert "SpecialMap" in rep["u_path_error"]
