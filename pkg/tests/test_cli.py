import hashlib
import json

import numpy as np
import pytest

from ebsvie.cli import main


def run(tmp_path, command, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    out = tmp_path / f"out_{command}"
    code = main([command, "--config", str(p), "--output-dir", str(out)])
    return code, out


def test_simulate(tmp_path):
    code, out = run(tmp_path, "simulate", {
        "problem": "ou_state", "grid": {"N": 10},
        "mc": {"n_paths": 50, "seed": 3},
        "simulate": {"start_t": 0.0, "start_x": [0.5]}})
    assert code == 0
    assert (out / "ensemble.npz").exists()
    man = json.loads((out / "run_manifest.json").read_text())
    assert man["command"] == "simulate"
    # manifest hashes really are the file hashes
    for name, digest in man["files"].items():
        actual = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert actual == digest


def test_solve_mc_windowed(tmp_path):
    code, out = run(tmp_path, "solve-mc", {
        "problem": "deterministic_linear", "grid": {"N": 20},
        "mc": {"n_paths": 32, "seed": 1},
        "solve-mc": {"windows": 4, "tol": 1e-10, "max_iter": 30}})
    assert code == 0
    lines = (out / "field.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 21 * 22 // 2


def test_solve_pde(tmp_path):
    code, out = run(tmp_path, "solve-pde", {
        "problem": "heat_quadratic", "grid": {"N": 20},
        "mesh": {"x_min": -6, "x_max": 6, "J": 60}})
    assert code == 0
    assert (out / "pde_field.npz").exists()


def test_variational(tmp_path):
    code, out = run(tmp_path, "variational", {
        "problem": "heat_linear", "grid": {"N": 10},
        "mc": {"n_paths": 1000, "seed": 5}})
    assert code == 0
    rows = (out / "z_compare.csv").read_text().strip().splitlines()[1:]
    # both estimators are exactly one on this instance
    for row in rows:
        _, _, zr, zp, rms = row.split(",")
        assert abs(float(zr) - 1) < 1e-9 and abs(float(zp) - 1) < 1e-9


def test_cross_validate(tmp_path):
    code, out = run(tmp_path, "cross-validate", {
        "problem": "heat_quadratic", "grid": {"N": 40}, "mesh": {"J": 80},
        "mc": {"n_paths": 3000, "seed": 9},
        "cross-validate": {"points": [[0.2, 0.5, 1.0]]}})
    assert code == 0
    doc = json.loads((out / "crossval.json").read_text())
    assert doc["n_pass"] == 1


def test_oracle_and_bench(tmp_path):
    code, out = run(tmp_path, "oracle", {
        "problem": "deterministic_linear", "oracle": {"N_oracle": 1000}})
    assert code == 0
    assert (out / "oracle.csv").exists()
    code, out = run(tmp_path, "bench", {
        "problem": "deterministic_linear", "bench": {"N_list": [25, 50]}})
    assert code == 0
    lines = (out / "convergence.csv").read_text().strip().splitlines()
    assert lines[0] == "N,max_err,observed_order"
    # halving the step roughly halves the error
    order = float(lines[2].split(",")[2])
    assert 0.8 < order < 1.3


def test_check_command(tmp_path):
    code, out = run(tmp_path, "check", {})
    assert code == 0
    doc = json.loads((out / "check_report.json").read_text())
    assert doc["passed"]
    assert any(r["check"].startswith("frozen:") for r in doc["results"])


def test_unknown_config_key_fatal(tmp_path, capsys):
    code, _ = run(tmp_path, "solve-mc", {
        "problem": "constant", "grid": {"N": 5}, "mystery": 1})
    assert code == 1
    assert "unknown config key" in capsys.readouterr().err


def test_malformed_json_reports_location(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"problem": "constant",}')
    code = main(["check", "--config", str(p), "--output-dir", str(tmp_path)])
    assert code == 1
    assert "line" in capsys.readouterr().err


def test_unknown_problem(tmp_path, capsys):
    code, _ = run(tmp_path, "solve-mc", {"problem": "nope", "grid": {"N": 5}})
    assert code == 1
    assert "nope" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path):
    # explicit stepping with a coarse grid and fine mesh is refused
    code, _ = run(tmp_path, "solve-pde", {
        "problem": "heat_quadratic", "grid": {"N": 10},
        "mesh": {"J": 400}, "pde": {"theta_weight": 0.0}})
    assert code == 2


def test_unknown_command():
    assert main(["frobnicate"]) == 1
