import math

import numpy as np
import pytest

from weingarten_flow.ambient import Signature, Warping
from weingarten_flow.config import DEFAULTS, ConfigParseError, load_config, parse_config, render_config
from weingarten_flow.curvfunc import Family
from weingarten_flow.fieldio import read_binary, read_field, read_text, write_binary, write_text
from weingarten_flow.flow import Phi
from weingarten_flow.surface import BaseGrid, GraphField

BASIC = """\
[model]
signature = riemannian
warping = Euclidean

[fspec]
base = power
p = -2.0

[grid]
resolution = 16x8

[barriers]
lower = 0.5
upper = 2.0
"""


def test_defaults_fill_missing_keys(tmp_path):
    cfg = parse_config(BASIC, base_dir=tmp_path)
    assert cfg.grid.shape == (8, 16)
    assert cfg.spec.family is Family.GAUSS_ROOT and cfg.spec.normalized
    assert cfg.flow.phi is Phi.LOG and cfg.flow.c_cfl == 0.2 and cfg.flow.tol_stationary == 1e-6
    assert cfg.flow.retry_limit == 8 and cfg.flow.kappa_floor == 1e-8
    assert cfg.seed == 0 and cfg.precheck_samples == 200
    assert cfg.out_dir == tmp_path / "out"
    assert np.all(cfg.flow.lower.u == 0.5) and np.all(cfg.flow.upper.u == 2.0)


def test_every_documented_key_is_accepted(tmp_path):
    sections = {s: {k: v for k, v in keys.items() if v is not None} for s, keys in DEFAULTS.items()}
    sections["barriers"] = {"lower": "0.5", "upper": "2.0"}
    sections["model"]["x0_max"] = "10"
    cfg = parse_config(render_config(sections), base_dir=tmp_path)
    assert cfg.model.interval == (0.0, 10.0)


@pytest.mark.parametrize("text,line,fragment", [
    (BASIC + "[flow]\nc_cfl = 0.1\nbogus = 3\n", 17, "unknown key"),
    (BASIC + "\n[extras]\nx = 1\n", 16, "unknown section"),
    (BASIC.replace("p = -2.0", "p = minus two"), 7, "expected a number"),
    (BASIC.replace("16x8", "16"), 10, "N_lon x N_lat"),
    (BASIC.replace("Euclidean", "DeSitter"), 1, "Riemannian models"),
    (BASIC + "[spec]\nfamily = Cubic\n", 16, "[spec] family"),
    ("lower = 1\n" + BASIC, 1, "outside any section"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigParseError) as exc:
        parse_config(text, source="cfg.ini")
    assert exc.value.line == line
    assert f"cfg.ini:{line}:" in str(exc.value) and fragment in str(exc.value)


def test_missing_barrier_is_an_error():
    with pytest.raises(ConfigParseError, match="missing"):
        parse_config(BASIC.replace("upper = 2.0\n", ""))


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigParseError, match="cannot read"):
        load_config(tmp_path / "nope.ini")


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for path in sorted(root.glob("*.ini")):
        cfg = load_config(path)
        cfg.flow.validate()
    des = load_config(root / "desitter.ini")
    assert des.model.signature is Signature.LORENTZIAN and des.model.warping is Warping.DESITTER
    assert des.grid.label == "48x24"


@pytest.mark.parametrize("grid", [BaseGrid.sphere(16, 8), BaseGrid.torus(8), BaseGrid.circle(12)])
def test_field_round_trip(tmp_path, grid):
    rng = np.random.default_rng(0)
    fld = GraphField(rng.standard_normal(grid.shape) * math.pi, grid)
    write_text(fld, tmp_path / "u.txt")
    write_binary(fld, tmp_path / "u.bin")
    assert np.array_equal(read_text(tmp_path / "u.txt", grid).u, fld.u)
    assert np.array_equal(read_binary(tmp_path / "u.bin", grid).u, fld.u)
    assert np.array_equal(read_field(tmp_path / "u.bin", grid).u, fld.u)
    assert (tmp_path / "u.bin").stat().st_size == 8 * grid.size


def test_binary_layout_is_little_endian_row_major(tmp_path):
    grid = BaseGrid.sphere(16, 8)
    fld = GraphField(np.arange(grid.size, dtype=float).reshape(grid.shape), grid)
    write_binary(fld, tmp_path / "u.bin")
    raw = np.frombuffer((tmp_path / "u.bin").read_bytes(), dtype="<f8")
    assert np.array_equal(raw, np.arange(grid.size))


def test_text_table_columns(tmp_path):
    grid = BaseGrid.sphere(16, 8)
    write_text(GraphField.constant(grid, 1.5), tmp_path / "u.txt")
    lines = (tmp_path / "u.txt").read_text().splitlines()
    assert lines[1] == "# node theta phi u"
    first = lines[2].split()
    assert first[0] == "0" and float(first[1]) == pytest.approx(math.pi / 16) and float(first[3]) == 1.5


def test_field_size_mismatch(tmp_path):
    write_binary(GraphField.constant(BaseGrid.torus(8), 1.0), tmp_path / "u.bin")
    with pytest.raises(ValueError, match="bytes"):
        read_binary(tmp_path / "u.bin", BaseGrid.torus(16))
    write_text(GraphField.constant(BaseGrid.torus(8), 1.0), tmp_path / "u.txt")
    with pytest.raises(ValueError):
        read_text(tmp_path / "u.txt", BaseGrid.torus(16))


def test_barrier_and_restart_fields_from_files(tmp_path):
    grid = BaseGrid.sphere(16, 8)
    write_binary(GraphField.constant(grid, 0.75), tmp_path / "start.bin")
    write_text(GraphField.constant(grid, 2.0), tmp_path / "outer.txt")
    text = BASIC.replace("upper = 2.0", "upper = outer.txt") + "[flow]\nu_init = start.bin\n"
    cfg = parse_config(text, base_dir=tmp_path)
    assert np.all(cfg.flow.upper.u == 2.0) and np.all(cfg.flow.initial_field().u == 0.75)
    with pytest.raises(ConfigParseError, match="cannot read field"):
        parse_config(BASIC.replace("upper = 2.0", "upper = missing.txt"), base_dir=tmp_path)
