import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from weingarten_flow.cli import main
from weingarten_flow.fieldio import read_binary, read_text
from weingarten_flow.surface import BaseGrid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """\
[model]
signature = riemannian
warping = Euclidean

[spec]
family = {family}

[fspec]
base = power
p = -2.0

[grid]
resolution = 16x8

[flow]
max_steps = {max_steps}

[barriers]
lower = {lower}
upper = {upper}
"""


def write_cfg(tmp_path, name="run.ini", family="GaussRoot", max_steps=2000000, lower=0.5, upper=2.0):
    path = tmp_path / name
    path.write_text(SMALL.format(family=family, max_steps=max_steps, lower=lower, upper=upper))
    return path


def test_run_small_grid_writes_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "Converged" and out["sup_residual"] < 1e-6
    o = tmp_path / "o"
    grid = BaseGrid.sphere(16, 8)
    u_txt = read_text(o / "final_u.txt", grid).u
    assert np.array_equal(u_txt, read_binary(o / "final_u.bin", grid).u)
    assert np.abs(u_txt - 1.0).max() <= 2e-2
    summary = json.loads((o / "summary.txt").read_text())
    assert summary["barriers"]["upper_valid"] and summary["grid"] == "16x8"
    with open(o / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["t", "dt", "residual"] and len(rows) == summary["steps"] + 1


def test_max_steps_exit_code(tmp_path):
    assert main(["run", "--config", str(write_cfg(tmp_path, max_steps=3)), "--out", str(tmp_path)]) == 2


def test_swapped_barriers_exit_1_before_stepping(tmp_path, capsys):
    cfg = write_cfg(tmp_path, lower=2.0, upper=0.5)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "lower barrier above upper barrier" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_invalid_barrier_pair_exit_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, lower=0.5, upper=0.8)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "invalid barriers" in capsys.readouterr().err


def test_mean_spec_rejected_by_precheck(tmp_path, capsys):
    cfg = write_cfg(tmp_path, family="Mean")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "class-(K) precheck" in err and "boundary_vanishing" in err


def test_parse_error_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(SMALL.format(family="GaussRoot", max_steps=10, lower=0.5, upper=2.0) + "[run]\nsed = 1\n")
    assert main(["check-barriers", "--config", str(path)]) == 1
    assert f"{path}:22: [run] sed: unknown key" in capsys.readouterr().err


def test_deterministic_trace(tmp_path):
    cfg = write_cfg(tmp_path, max_steps=300)
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", "7"]) == 2
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_check_f_reports(capsys):
    assert main(["check-f", "--family", "GaussRoot", "--samples", "1000", "--seed", "0"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["classK_passed"] and all(c["passed"] for c in rep["classK"].values())
    assert rep["eps0"]["euler_component_r2"] == pytest.approx(0.5, abs=1e-12)
    assert main(["check-f", "--family", "ScalarRoot", "--n", "3", "--samples", "200"]) == 1
    rep = json.loads(capsys.readouterr().out)
    assert not rep["classK"]["boundary_vanishing"]["passed"]
    assert "witness" in rep["classK"]["boundary_vanishing"]


def test_check_barriers_desitter(capsys):
    assert main(["check-barriers", "--config", str(CONFIGS / "desitter.ini")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["valid"] and rep["upper_margin"] == pytest.approx(math.tanh(0.2) - 0.1, rel=1e-9)


@pytest.mark.parametrize("name,expected", [("euclidean_sphere.ini", 1.0), ("desitter.ini", -1.91501)])
def test_oracle_stationary_slice(capsys, name, expected):
    assert main(["oracle", "stationary-slice", "--config", str(CONFIGS / name)]) == 0
    assert json.loads(capsys.readouterr().out)["x0"] == pytest.approx(expected, abs=1e-5)


def test_oracle_stationary_slice_constant_f(tmp_path, capsys):
    path = tmp_path / "half.ini"
    path.write_text(SMALL.format(family="GaussRoot", max_steps=10, lower=0.5, upper=4.0)
                    .replace("base = power\np = -2.0", "base = const\nc = 0.5"))
    assert main(["oracle", "stationary-slice", "--config", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["x0"] == pytest.approx(2.0, abs=1e-9)


def test_oracle_embedding_csv(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["oracle", "embedding", "--config", str(cfg), "--field", "upper", "--amplitude", "0.1",
                 "--out", str(tmp_path / "o")]) == 0
    with open(tmp_path / "o" / "oracle_embedding.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 128
    err = max(abs(float(r["kappa1_solver"]) - float(r["kappa1_oracle"])) for r in rows)
    assert err <= 0.05


def test_oracle_gradient_csv(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["oracle", "gradient", "--config", str(cfg), "--samples", "50", "--seed", "3"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 50 and max(float(r["max_rel_err"]) for r in rows) <= 1e-6


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "weingarten_flow.cli", "check-f", "--samples", "50"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and '"classK_passed": true' in res.stdout


def test_euclidean_acceptance_config_via_cli(tmp_path, capsys):
    assert main(["run", "--config", str(CONFIGS / "euclidean_sphere.ini"), "--out", str(tmp_path)]) == 0
    u = read_binary(tmp_path / "final_u.bin", BaseGrid.sphere(48, 24)).u
    assert np.abs(u - 1.0).max() <= 5e-3
