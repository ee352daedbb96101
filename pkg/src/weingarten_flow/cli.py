"""Command-line entry point: ``wflow {run,check-f,check-barriers,oracle}``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import oracles
from .barriers import ConfigError, check_barriers
from .config import RunConfig, load_config
from .curvfunc import CurvatureSpec, Family, ParameterError, check_classK, estimate_eps0
from .fieldio import write_binary, write_text
from .flow import FlowFailure, run
from .surface import GraphField, surface_geometry

EXIT_CONFIG = 1


def _print_block(data: dict, stream=None) -> None:
    (stream or sys.stdout).write(json.dumps(data, indent=2, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return str(obj)


def _classK_block(spec: CurvatureSpec, n: int, samples: int, seed: int) -> tuple[dict, bool]:
    cert = check_classK(spec, samples=samples, seed=seed, n=n)
    eps = estimate_eps0(spec, samples=samples, seed=seed, n=n, check=False)
    block = {
        "spec": spec.describe(),
        "n": n,
        "samples": samples,
        "seed": seed,
        "classK": {name: {"passed": c.passed, "worst_margin": c.worst_margin,
                          **({"witness": c.witness} if c.witness else {}),
                          **({"note": c.note} if c.note else {})}
                   for name, c in cert.conditions.items()},
        "classK_passed": cert.passed,
        "eps0": {"gradient_trace_r1": eps.r1, "euler_component_r2": eps.r2,
                 "euler_component_r2_max": eps.r2_max, "curvature_square_r3": eps.r3,
                 "implication_r1_le_r3": eps.implication_holds,
                 "implication_worst": eps.implication_worst,
                 "chain_holds": eps.chain_holds, "chain_worst": eps.chain_worst},
    }
    ok = cert.passed and eps.r1 > 0
    return block, ok


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out_dir = Path(args.out)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    block, ok = _classK_block(cfg.spec, cfg.grid.n, cfg.precheck_samples, cfg.seed)
    if not ok:
        failed = [k for k, v in block["classK"].items() if not v["passed"]]
        if block["eps0"]["gradient_trace_r1"] <= 0:
            failed.append("gradient_trace")
        print(f"error: {cfg.spec.describe()} rejected by the class-(K) precheck: "
              f"failed {', '.join(failed)}", file=sys.stderr)
        return EXIT_CONFIG
    report = check_barriers(cfg.flow.lower, cfg.flow.upper, cfg.model, cfg.spec, cfg.fspec,
                            cfg.flow.kappa_floor, cfg.flow.delta_space)
    if not report.valid:
        print("error: invalid barriers: " + json.dumps(report.summary(), default=_jsonable),
              file=sys.stderr)
        return EXIT_CONFIG

    result = run(cfg.flow)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / cfg.trace_name, "w") as fh:
        result.trace.write_csv(fh)
    write_text(result.state.u, out / f"{cfg.final_name}.txt")
    write_binary(result.state.u, out / f"{cfg.final_name}.bin")
    summary = result.summary()
    summary["grid"] = cfg.grid.label
    summary["spec"] = cfg.spec.describe()
    summary["seed"] = cfg.seed
    summary["barriers"] = report.summary()
    with open(out / cfg.summary_name, "w") as fh:
        _print_block(summary, fh)
    _print_block({k: summary[k] for k in ("verdict", "exit_code", "steps", "t", "sup_residual",
                                         "u_min", "u_max", "runtime_s")})
    return result.verdict.exit_code


def _spec_from_args(args) -> tuple[CurvatureSpec, int]:
    if args.config:
        cfg = load_config(args.config)
        return cfg.spec, args.n or cfg.grid.n
    spec = CurvatureSpec(Family.parse(args.family), a=args.a, g=args.g)
    return spec, args.n or 2


def cmd_check_f(args) -> int:
    spec, n = _spec_from_args(args)
    spec.check_dim(n)
    block, ok = _classK_block(spec, n, args.samples, args.seed or 0)
    _print_block(block)
    return 0 if block["classK_passed"] else EXIT_CONFIG


def cmd_check_barriers(args) -> int:
    cfg = _load(args)
    report = check_barriers(cfg.flow.lower, cfg.flow.upper, cfg.model, cfg.spec, cfg.fspec,
                            cfg.flow.kappa_floor, cfg.flow.delta_space)
    summary = report.summary()
    summary["valid"] = report.valid
    _print_block(summary)
    return 0 if report.valid else EXIT_CONFIG


def _oracle_embedding(cfg: RunConfig, which: str, amplitude: float, stream) -> None:
    """Solver vs embedding oracle on ``c + amplitude * cos(x1)`` with ``c`` the chosen slice."""
    fld = {"lower": cfg.flow.lower, "upper": cfg.flow.upper}.get(which)
    if fld is None:
        fld = cfg.flow.initial_field()
    if np.ptp(fld.u) != 0.0:
        raise ConfigError("the embedding oracle needs an analytic field: configure a slice value")
    c = float(fld.u.flat[0])
    func = lambda x1, *rest: c + amplitude * np.cos(x1)  # noqa: E731
    fld = GraphField.from_function(cfg.grid, func)
    geom = surface_geometry(fld, cfg.model, cfg.flow.delta_space)
    ref = oracles.embedding_h(func, cfg.grid, cfg.model)
    n = cfg.grid.n
    w = csv.writer(stream, lineterminator="\n")
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    w.writerow(["node"] + [f"x{i + 1}" for i in range(n)] + ["u"]
               + [f"h{i}{j}_solver" for i, j in pairs] + [f"h{i}{j}_oracle" for i, j in pairs]
               + [f"kappa{i + 1}_solver" for i in range(n)] + [f"kappa{i + 1}_oracle" for i in range(n)])
    coords = cfg.grid.coords.reshape(n, -1)
    for k in range(cfg.grid.size):
        idx = cfg.grid.node_index(k)
        row = [k] + [repr(float(coords[i, k])) for i in range(n)] + [repr(float(fld.u[idx]))]
        row += [repr(float(geom.h[(i, j) + idx])) for i, j in pairs]
        row += [repr(float(ref.h[(i, j) + idx])) for i, j in pairs]
        row += [repr(float(x)) for x in geom.kappa[idx]] + [repr(float(x)) for x in ref.kappa[idx]]
        w.writerow(row)


def _oracle_gradient(spec: CurvatureSpec, n: int, samples: int, seed: int, stream) -> None:
    from .curvfunc import F_and_grad, sample_cone

    kappa = sample_cone(n, samples, np.random.default_rng(seed))
    _, grad = F_and_grad(spec, kappa)
    fd = oracles.fd_gradient_F(spec, kappa)
    w = csv.writer(stream, lineterminator="\n")
    w.writerow([f"kappa{i + 1}" for i in range(n)] + [f"F{i + 1}_analytic" for i in range(n)]
               + [f"F{i + 1}_fd" for i in range(n)] + ["max_rel_err"])
    rel = np.abs(grad - fd).max(axis=-1) / np.abs(grad).max(axis=-1)
    for s in range(samples):
        w.writerow([repr(float(x)) for x in (*kappa[s], *grad[s], *fd[s], rel[s])])


def cmd_oracle(args) -> int:
    cfg = _load(args)
    if args.kind == "stationary-slice":
        x0 = oracles.stationary_slice(cfg.model, cfg.fspec)
        _print_block({"model": cfg.model.warping.value, "x0": x0, "abs_x0": abs(x0),
                      "kappa": float(math.fabs(oracles.slice_principal_curvature(
                          cfg.model.signature, cfg.model.warping, x0)))})
        return 0
    stream = sys.stdout
    target = None
    if args.out is not None:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        target = Path(args.out) / f"oracle_{args.kind}.csv"
        stream = open(target, "w")
    try:
        if args.kind == "embedding":
            _oracle_embedding(cfg, args.field, args.amplitude, stream)
        else:
            _oracle_gradient(cfg.spec, cfg.grid.n, args.samples, cfg.seed, stream)
    finally:
        if target is not None:
            stream.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wflow", description="Curvature flows of graphs in warped products.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="validate, flow to stationarity, write artifacts")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-f", help="class-(K) and structural-ratio report for a curvature function")
    c.add_argument("--config")
    c.add_argument("--family", default="GaussRoot")
    c.add_argument("--a", type=float, default=0.0)
    c.add_argument("--g", default="sigma1")
    c.add_argument("--n", type=int)
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check_f)

    b = sub.add_parser("check-barriers", help="validate the configured barrier pair")
    b.add_argument("--config", required=True)
    b.set_defaults(func=cmd_check_barriers)

    o = sub.add_parser("oracle", help="independent reference computations")
    o.add_argument("kind", choices=["stationary-slice", "embedding", "gradient"])
    o.add_argument("--config", required=True)
    o.add_argument("--field", choices=["lower", "upper", "initial"], default="initial")
    o.add_argument("--amplitude", type=float, default=0.0, help="cos(x1) perturbation for 'embedding'")
    o.add_argument("--samples", type=int, default=100)
    o.add_argument("--seed", type=int)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlowFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
