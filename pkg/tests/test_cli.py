import csv
import json
import os
import subprocess
import sys
from importlib import resources

import pytest

from schauderlab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_SOLVER, main
from schauderlab.fieldio import load_field

SCEN = resources.files("schauderlab").joinpath("scenarios")

SMALL = """\
scenario.id = small
scenario.kind = plaplace
problem.p = 2.0
grid.n = 33
grid.lower = 0.0
grid.upper = 3.141592653589793
grid.t_end = 0.1
grid.dt = 0.01
data.kind = oracle
data.oracle = heat_sine
"""


def write(tmp_path, text, name="s.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_heat_oracle_exit_zero(tmp_path, capsys):
    code = main(["verify", "--config", str(SCEN / "heat_oracle.cfg"), "--out", str(tmp_path)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "heat_oracle" / "reports.csv")))
    assert [r["name"] for r in rows] == ["oracle_error"]
    assert rows[0]["status"] == "pass" and float(rows[0]["lhs"]) <= 1e-3
    data = json.loads((tmp_path / "heat_oracle" / "reports.json").read_text())
    assert data[0]["scenario"] == "heat_oracle" and data[0]["level"] == 0
    assert "oracle_error" in capsys.readouterr().out


def test_empty_checker_list_solves_and_exports(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"), "--format", "json"]) == EXIT_OK
    u = load_field(tmp_path / "o" / "small" / "field_level0.txt")
    assert u.values.shape == (11, 33, 1)
    assert json.loads((tmp_path / "o" / "small" / "reports.json").read_text()) == []


def test_failing_budget_exit_one(tmp_path):
    cfg = write(tmp_path, SMALL + "checks = oracle_error\ncheck.oracle_error.budget = 1e-12\n")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path)]) == EXIT_FAIL


def test_malformed_key_exit_two(tmp_path, capsys):
    cfg = write(tmp_path, SMALL + "grid.nn = 5\n")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert f"{cfg}:11:" in capsys.readouterr().err


def test_non_refinable_study_exit_two(tmp_path, capsys):
    cfg = write(tmp_path, SMALL.replace("grid.n = 33", "grid.n = 1500"))
    assert main(["study", "--config", cfg, "--levels", "3", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "max_nodes" in capsys.readouterr().err


def test_solver_failure_exit_three(tmp_path, capsys):
    bad = SMALL.replace("problem.p = 2.0", "problem.p = 3.0").replace(
        "data.kind = oracle\ndata.oracle = heat_sine", "data.kind = expression\ndata.expression = sin(x)") + \
        "solver.newton_tol = 1e-300\nsolver.max_newton_iters = 1\n"
    cfg = write(tmp_path, bad)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path)]) == EXIT_SOLVER
    assert "scenario small" in capsys.readouterr().err


def test_study_levels_one_equals_run(tmp_path):
    cfg = write(tmp_path, SMALL + "checks = oracle_error\n")
    main(["verify", "--config", cfg, "--out", str(tmp_path / "a"), "--format", "json"])
    main(["study", "--config", cfg, "--levels", "1", "--out", str(tmp_path / "b"), "--format", "json"])
    a = json.loads((tmp_path / "a" / "small" / "reports.json").read_text())
    b = json.loads((tmp_path / "b" / "small" / "reports.json").read_text())
    assert a == b


def test_reports_are_deterministic(tmp_path):
    cfg = str(SCEN / "k_sweep.cfg")
    for d in ("a", "b"):
        assert main(["verify", "--config", cfg, "--out", str(tmp_path / d), "--seed", "3"]) == EXIT_OK
    for name in ("reports.csv", "reports.json"):
        assert (tmp_path / "a" / "k_sweep" / name).read_bytes() == (tmp_path / "b" / "k_sweep" / name).read_bytes()


def test_echo_round_trip(tmp_path, capsys):
    assert main(["echo", "--config", str(SCEN / "holder_coefficient.cfg")]) == EXIT_OK
    text = capsys.readouterr().out
    cfg = write(tmp_path, text)
    assert main(["echo", "--config", cfg]) == EXIT_OK
    assert capsys.readouterr().out == text


def test_output_env_var(tmp_path):
    cfg = write(tmp_path, SMALL)
    env = dict(os.environ, SCHAUDERLAB_OUT=str(tmp_path / "envout"))
    res = subprocess.run([sys.executable, "-m", "schauderlab.cli", "solve", "--config", cfg, "--format", "csv"],
                         env=env, cwd=tmp_path, capture_output=True, text=True)
    assert res.returncode == EXIT_OK, res.stderr
    assert (tmp_path / "envout" / "small" / "reports.csv").exists()
    assert (tmp_path / "envout" / "small" / "field_level0.txt").exists()
    assert not (tmp_path / "envout" / "small" / "reports.json").exists()
