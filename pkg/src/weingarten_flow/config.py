"""Run configuration: an INI-style key-value file with fixed sections.

Every key has a default in ``DEFAULTS`` (``None`` marks an optional key).
Unknown sections or keys are rejected, and every error names the offending
line.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .ambient import AmbientModel, Base, Signature, Warping
from .barriers import ConfigError
from .curvfunc import CurvatureSpec, Family, ParameterError
from .fieldio import read_field
from .flow import FlowConfig, Phi
from .surface import BaseGrid, FSpec, FSpecError, GraphField

__all__ = ["DEFAULTS", "ConfigParseError", "RunConfig", "load_config", "parse_config", "render_config"]


DEFAULTS: dict[str, dict[str, str | None]] = {
    "model": {"signature": "riemannian", "base": "RoundSphere", "warping": "Euclidean", "n": "2",
              "x0_min": None, "x0_max": None},
    "spec": {"family": "GaussRoot", "a": "0.0", "g": "sigma1", "normalized": "true",
             "kappa_min": "0.0"},
    "fspec": {"base": "const", "c": "1.0", "a": "1.0", "p": "0.0", "b": "0.0", "beta": "0.0"},
    "grid": {"resolution": "48x24"},
    "flow": {"phi": "log", "c_cfl": "0.2", "tol_stationary": "1e-6", "max_steps": "2000000",
             "kappa_floor": "1e-8", "delta_space": "1e-3", "retry_limit": "8", "u_init": None},
    "barriers": {"lower": None, "upper": None},
    "output": {"dir": "out", "trace": "trace.csv", "final": "final_u", "summary": "summary.txt"},
    "run": {"seed": "0", "precheck_samples": "200"},
}


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line


@dataclass
class RunConfig:
    model: AmbientModel
    spec: CurvatureSpec
    fspec: FSpec
    grid: BaseGrid
    flow: FlowConfig
    out_dir: Path
    trace_name: str
    final_name: str
    summary_name: str
    seed: int
    precheck_samples: int


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Line numbers (1-based) of section headers and keys."""
    where: dict[tuple[str, str | None], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            where.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:]+)[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), no)
    return where


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, lines, source: str, base_dir: Path):
        self.p = parser
        self.lines = lines
        self.source = source
        self.base_dir = base_dir

    def err(self, section: str, key: str | None, message: str) -> ConfigParseError:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        label = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigParseError(f"{label}: {message}", line, self.source)

    def raw(self, section: str, key: str) -> str | None:
        if self.p.has_option(section, key):
            return self.p.get(section, key).strip()
        return DEFAULTS[section][key]

    def text(self, section: str, key: str) -> str | None:
        return self.raw(section, key)

    def num(self, section: str, key: str) -> float | None:
        val = self.raw(section, key)
        if val is None:
            return None
        try:
            return float(val)
        except ValueError:
            raise self.err(section, key, f"expected a number, got {val!r}") from None

    def integer(self, section: str, key: str) -> int:
        val = self.raw(section, key)
        try:
            return int(val)
        except (TypeError, ValueError):
            raise self.err(section, key, f"expected an integer, got {val!r}") from None

    def boolean(self, section: str, key: str) -> bool:
        val = (self.raw(section, key) or "").lower()
        if val in ("true", "yes", "1", "on"):
            return True
        if val in ("false", "no", "0", "off"):
            return False
        raise self.err(section, key, f"expected a boolean, got {val!r}")

    def path(self, section: str, key: str) -> Path:
        p = Path(self.raw(section, key))
        return p if p.is_absolute() else self.base_dir / p


def _parse_resolution(r: _Reader, base: Base, n: int):
    val = r.text("grid", "resolution").lower().replace("×", "x")
    parts = [s for s in val.split("x") if s]
    try:
        nums = [int(s) for s in parts]
    except ValueError:
        raise r.err("grid", "resolution", f"expected N or N_lonxN_lat, got {val!r}") from None
    if n == 1 or base is Base.FLAT_TORUS:
        if len(nums) != 1 and not (len(nums) == 2 and nums[0] == nums[1]):
            raise r.err("grid", "resolution", f"this base needs a single resolution N, got {val!r}")
        return nums[0]
    if len(nums) != 2:
        raise r.err("grid", "resolution", f"sphere grids need N_lon x N_lat, got {val!r}")
    return tuple(nums)


def _barrier(r: _Reader, key: str, grid: BaseGrid) -> GraphField:
    val = r.raw("barriers", key)
    if val is None:
        raise r.err("barriers", key, "missing (a slice value x0 or a field file path)")
    try:
        return GraphField.constant(grid, float(val))
    except ValueError:
        pass
    try:
        return read_field(r.path("barriers", key), grid)
    except (OSError, ValueError) as exc:
        raise r.err("barriers", key, f"cannot read field: {exc}") from None


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ConfigParseError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, source) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigParseError(f"duplicate section [{exc.section}]", exc.lineno, source) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError("key outside any section", exc.lineno, source) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigParseError("malformed line", line, source) from None

    lines = _line_index(text)
    r = _Reader(parser, lines, source, base_dir or Path.cwd())
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigParseError(f"unknown section [{section}]", lines.get((section.lower(), None)), source)
        for key in parser.options(section):
            if key not in DEFAULTS[section]:
                raise r.err(section, key, "unknown key")

    try:
        signature = Signature.parse(r.text("model", "signature"))
    except ValueError as exc:
        raise r.err("model", "signature", str(exc)) from None
    try:
        base = Base.parse(r.text("model", "base"))
    except ValueError as exc:
        raise r.err("model", "base", str(exc)) from None
    try:
        warping = Warping.parse(r.text("model", "warping"))
    except ValueError as exc:
        raise r.err("model", "warping", str(exc)) from None
    n = r.integer("model", "n")
    lo, hi = r.num("model", "x0_min"), r.num("model", "x0_max")
    interval = None
    if lo is not None or hi is not None:
        interval = (-math.inf if lo is None else lo, math.inf if hi is None else hi)
    try:
        model = AmbientModel(signature, base, warping, n=n, interval=interval)
    except ValueError as exc:
        raise r.err("model", None, str(exc)) from None

    try:
        family = Family.parse(r.text("spec", "family"))
    except ParameterError as exc:
        raise r.err("spec", "family", str(exc)) from None
    try:
        spec = CurvatureSpec(family, a=r.num("spec", "a"),
                             g=r.text("spec", "g"), normalized=r.boolean("spec", "normalized"),
                             kappa_min=r.num("spec", "kappa_min"))
        spec.check_dim(n)
    except ParameterError as exc:
        raise r.err("spec", None, str(exc)) from None

    try:
        fspec = FSpec(r.text("fspec", "base"), c=r.num("fspec", "c"), a=r.num("fspec", "a"),
                      p=r.num("fspec", "p"), b=r.num("fspec", "b"), beta=r.num("fspec", "beta"))
    except FSpecError as exc:
        raise r.err("fspec", "base", str(exc)) from None

    try:
        grid = BaseGrid.make(base, n, _parse_resolution(r, base, n))
    except ValueError as exc:
        raise r.err("grid", "resolution", str(exc)) from None

    lower = _barrier(r, "lower", grid)
    upper = _barrier(r, "upper", grid)
    u_init = None
    if r.raw("flow", "u_init") is not None:
        try:
            u_init = read_field(r.path("flow", "u_init"), grid)
        except (OSError, ValueError) as exc:
            raise r.err("flow", "u_init", f"cannot read field: {exc}") from None
    try:
        phi = Phi.parse(r.text("flow", "phi"))
    except ConfigError as exc:
        raise r.err("flow", "phi", str(exc)) from None
    flow = FlowConfig(model, spec, fspec, grid, lower, upper, u_init=u_init, phi=phi,
                      c_cfl=r.num("flow", "c_cfl"), tol_stationary=r.num("flow", "tol_stationary"),
                      max_steps=r.integer("flow", "max_steps"), kappa_floor=r.num("flow", "kappa_floor"),
                      delta_space=r.num("flow", "delta_space"),
                      retry_limit=r.integer("flow", "retry_limit"))

    return RunConfig(model, spec, fspec, grid, flow, r.path("output", "dir"),
                     r.text("output", "trace"), r.text("output", "final"), r.text("output", "summary"),
                     r.integer("run", "seed"), r.integer("run", "precheck_samples"))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path), path.parent)


def render_config(sections: dict[str, dict[str, object]]) -> str:
    """Inverse helper for writing configs programmatically."""
    out = []
    for section, values in sections.items():
        out.append(f"[{section}]")
        out.extend(f"{k} = {v}" for k, v in values.items())
        out.append("")
    return "\n".join(out)
