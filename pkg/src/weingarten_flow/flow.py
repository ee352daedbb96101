"""Scalar curvature flow ``du/dt = -e^{-psi} v (Phi(F) - Phi(f))`` and its monitoring.

Explicit Euler in time.  The step size follows the parabolic scale of the
linearized operator ``Phi'(F) F^{ij}``; a step that leaves the admissible set
(convexity floor, space-likeness, validity interval) is rejected and retried
with half the step.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Callable

import numpy as np

from .ambient import AmbientModel, DomainError
from .barriers import ConfigError
from .curvfunc import CurvatureDomainError, CurvatureSpec, F_and_grad
from .surface import (BaseGrid, ConvexityLoss, FSpec, FSpecError, GeometryError, GraphField,
                      SpacelikeError, SurfaceGeometry, eval_f, surface_geometry)

__all__ = [
    "Evaluation",
    "FlowConfig",
    "FlowFailure",
    "FlowMonitor",
    "FlowResult",
    "FlowState",
    "FlowTrace",
    "Phi",
    "Stepper",
    "TRACE_COLUMNS",
    "TraceRecord",
    "Verdict",
    "evaluate_reference",
    "initial_state",
    "make_evaluator",
    "residual_field",
    "run",
    "stable_dt",
    "step",
]


class Phi(Enum):
    LOG = "log"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, name: str) -> "Phi":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown Phi {name!r}; expected 'log' or 'identity'") from None

    def __call__(self, r):
        return np.log(r) if self is Phi.LOG else np.asarray(r, dtype=float)

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 / r if self is Phi.LOG else np.ones_like(r)


class Verdict(Enum):
    CONVERGED = "Converged"
    MAX_STEPS = "MaxSteps"
    FAILED = "Failed"

    @property
    def exit_code(self) -> int:
        return {Verdict.CONVERGED: 0, Verdict.MAX_STEPS: 2, Verdict.FAILED: 3}[self]


class FlowFailure(RuntimeError):
    def __init__(self, message: str, node=None, kappa=None, step_index=None):
        super().__init__(message)
        self.node = node
        self.kappa = kappa
        self.step_index = step_index

    def report(self) -> dict:
        return {
            "reason": str(self),
            "node": list(self.node) if self.node is not None else None,
            "kappa": np.asarray(self.kappa).tolist() if self.kappa is not None else None,
            "step": self.step_index,
        }


@dataclass
class FlowConfig:
    model: AmbientModel
    spec: CurvatureSpec
    fspec: FSpec
    grid: BaseGrid
    lower: GraphField
    upper: GraphField
    u_init: GraphField | None = None
    phi: Phi = Phi.LOG
    c_cfl: float = 0.2
    tol_stationary: float = 1e-6
    max_steps: int = 2_000_000
    kappa_floor: float = 1e-8
    delta_space: float = 1e-3
    retry_limit: int = 8
    compiled: bool = True

    def validate(self) -> None:
        if not self.spec.normalized:
            raise ConfigError("the flow needs the degree-one normalized curvature function")
        self.spec.check_dim(self.grid.n)
        if self.grid.n != self.model.n or self.grid.base is not self.model.base:
            raise ConfigError("grid and ambient model disagree on the base")
        for name, fld in (("lower", self.lower), ("upper", self.upper), ("u_init", self.u_init)):
            if fld is not None and fld.grid != self.grid:
                raise ConfigError(f"{name} field is not on the configured grid")
        if np.any(self.lower.u > self.upper.u):
            raise ConfigError("barriers swapped: lower barrier above upper barrier")
        if self.u_init is not None:
            u = self.u_init.u
            if np.any(u < self.lower.u - 1e-12) or np.any(u > self.upper.u + 1e-12):
                raise ConfigError("initial field leaves the region between the barriers")
        if not self.c_cfl > 0 or self.retry_limit < 0 or self.max_steps < 0:
            raise ConfigError("c_cfl must be positive, retry_limit and max_steps nonnegative")

    def initial_field(self) -> GraphField:
        """The signature's starting barrier unless an explicit (restart) field is given."""
        if self.u_init is not None:
            return self.u_init.copy()
        return (self.upper if self.model.lorentzian else self.lower).copy()


@dataclass
class Evaluation:
    """Per-node quantities of one admissible graph (flat node order)."""

    kappa: np.ndarray
    v: np.ndarray
    vfac: np.ndarray
    F: np.ndarray
    residual: np.ndarray
    dt_coef: np.ndarray        # Phi'(F) max_i F_i v^2 lambda_max(g^-1)
    stats: np.ndarray          # min/max residual, min/max kappa, max vfac, max dt_coef
    geom: SurfaceGeometry | None = None

    @property
    def sup_residual(self) -> float:
        return float(max(-self.stats[0], self.stats[1]))


@dataclass
class FlowState:
    t: float
    u: GraphField
    ev: Evaluation
    sign_flag: int
    steps: int = 0
    last_dt: float = 0.0
    retries: int = 0

    @property
    def sup_residual(self) -> float:
        return self.ev.sup_residual


@dataclass
class TraceRecord:
    t: float
    dt: float
    residual: float
    min_kappa: float
    max_kappa: float
    min_u: float
    max_u: float
    max_vfac: float
    sign_violation: float
    retries: int


TRACE_COLUMNS = tuple(f.name for f in fields(TraceRecord))


class FlowTrace:
    """Append-only per-step record, stored column-wise in growing chunks."""

    _CHUNK = 8192

    def __init__(self):
        self._chunks: list[np.ndarray] = []
        self._fill = self._CHUNK

    def append_values(self, *values) -> None:
        if self._fill == self._CHUNK:
            self._chunks.append(np.empty((self._CHUNK, len(TRACE_COLUMNS))))
            self._fill = 0
        self._chunks[-1][self._fill] = values
        self._fill += 1

    def append(self, rec: TraceRecord) -> None:
        self.append_values(*(getattr(rec, c) for c in TRACE_COLUMNS))

    def table(self) -> np.ndarray:
        if not self._chunks:
            return np.empty((0, len(TRACE_COLUMNS)))
        return np.concatenate(self._chunks[:-1] + [self._chunks[-1][: self._fill]])

    def __len__(self) -> int:
        return 0 if not self._chunks else (len(self._chunks) - 1) * self._CHUNK + self._fill

    def __getitem__(self, i: int) -> TraceRecord:
        m = len(self)
        if i < 0:
            i += m
        if not 0 <= i < m:
            raise IndexError(i)
        row = self._chunks[i // self._CHUNK][i % self._CHUNK]
        vals = [float(x) for x in row]
        vals[-1] = int(vals[-1])
        return TraceRecord(*vals)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def column(self, name: str) -> np.ndarray:
        return self.table()[:, TRACE_COLUMNS.index(name)]

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.table():
            w.writerow([repr(float(x)) for x in row[:-1]] + [int(row[-1])])


@dataclass
class FlowMonitor:
    initial_sup_residual: float = 0.0
    max_sign_violation: float = 0.0
    max_monotonicity_violation: float = 0.0
    max_confinement_violation: float = 0.0
    min_kappa: float = math.inf
    max_vfac: float = 0.0
    total_retries: int = 0

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in (
            "initial_sup_residual", "max_sign_violation", "max_monotonicity_violation",
            "max_confinement_violation", "min_kappa", "max_vfac", "total_retries")}


@dataclass
class FlowResult:
    state: FlowState
    trace: FlowTrace
    verdict: Verdict
    monitor: FlowMonitor
    failure: FlowFailure | None = None
    runtime: float = 0.0
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        u = self.state.u.u
        out = {
            "verdict": self.verdict.value,
            "exit_code": self.verdict.exit_code,
            "steps": self.state.steps,
            "t": self.state.t,
            "sup_residual": self.state.sup_residual,
            "u_min": float(u.min()),
            "u_max": float(u.max()),
            "sign_flag": self.state.sign_flag,
            "runtime_s": self.runtime,
        }
        out.update(self.monitor.summary())
        if self.failure is not None:
            out["failure"] = self.failure.report()
        out.update(self.extras)
        return out


# --- kernels -----------------------------------------------------------------


GUARD_ERRORS = (GeometryError, DomainError, CurvatureDomainError)


def evaluate_reference(u: GraphField, cfg: FlowConfig) -> Evaluation:
    """Numpy evaluation through ``surface_geometry``; raises a guard error when inadmissible."""
    geom = surface_geometry(u, cfg.model, cfg.delta_space)
    bad = geom.convexity_violation(cfg.kappa_floor)
    if bad is not None:
        node, kap = bad
        raise ConvexityLoss(f"convexity lost at node {node}: kappa = {kap}", node, kap)
    F, grad = F_and_grad(cfg.spec, geom.kappa)
    f = eval_f(cfg.fspec, u, geom)
    coef = cfg.phi.deriv(F) * grad.max(axis=-1) * geom.v ** 2 * _max_eig_sym(geom.g_inv)
    n = u.grid.n
    kappa = geom.kappa.reshape(-1, n)
    if n == 1:
        kappa = np.repeat(kappa, 2, axis=1)
    res = (cfg.phi(F) - cfg.phi(f)).reshape(-1)
    vfac = geom.vfac.reshape(-1)
    coef = coef.reshape(-1)
    stats = np.array([res.min(), res.max(), kappa.min(), kappa.max(), vfac.max(), coef.max()])
    return Evaluation(kappa, geom.v.reshape(-1), vfac, F.reshape(-1), res, coef, stats, geom)


class _CompiledEvaluator:
    def __init__(self, cfg: FlowConfig):
        from . import _kernel

        self._k = _kernel
        self.grid = cfg.grid
        self.args = _kernel.KernelParams(cfg.model, cfg.spec, cfg.fspec, cfg.grid,
                                         cfg.phi is Phi.LOG, cfg.kappa_floor,
                                         cfg.delta_space).args()

    def __call__(self, u: GraphField) -> Evaluation:
        k = self._k
        N = self.grid.size
        kappa = np.empty((N, 2))
        v, vfac, F, res, coef = (np.empty(N) for _ in range(5))
        stats = np.empty(6)
        arr = u.u.reshape(1, -1) if self.grid.n == 1 else u.u
        status, flat = k.evaluate_nodes(arr, *self.args, kappa, v, vfac, F, res, coef, stats)
        if status != k.OK:
            node = self.grid.node_index(flat)
            x0 = float(u.u[node])
            if status == k.BAD_X0:
                raise DomainError(f"x0 = {x0:.6g} outside validity interval at node {node}")
            if status == k.NOT_SPACELIKE:
                raise SpacelikeError(f"graph not uniformly space-like at node {node}", node)
            if status == k.NOT_PD:
                raise GeometryError(f"induced metric not positive definite at node {node}", node)
            if status == k.NOT_CONVEX:
                kap = kappa[flat, : self.grid.n].copy()
                raise ConvexityLoss(f"convexity lost at node {node}: kappa = {kap}", node, kap)
            raise FSpecError(f"prescribed f must be positive, fails at node {node}")
        return Evaluation(kappa, v, vfac, F, res, coef, stats)


def _advance_numpy(u, v, res, dt, lower, upper, direction, out):
    out[...] = u - dt * (v * res).reshape(u.shape)
    conf = max(0.0, float((lower - out).max()), float((out - upper).max()))
    mono = max(0.0, float((-direction * (out - u)).max()))
    return conf, mono, float(out.min()), float(out.max())


def _compiled_available() -> bool:
    try:
        from . import _kernel  # noqa: F401
    except ImportError:
        return False
    return True


def make_evaluator(cfg: FlowConfig, compiled: bool | None = None) -> Callable[[GraphField], Evaluation]:
    """The compiled node loop when available, else the numpy reference."""
    if compiled is None:
        compiled = cfg.compiled
    if compiled and _compiled_available():
        return _CompiledEvaluator(cfg)
    return lambda u: evaluate_reference(u, cfg)


def residual_field(state: FlowState) -> np.ndarray:
    """Node-wise ``Phi(F) - Phi(f)`` on the grid."""
    return state.ev.residual.reshape(state.u.grid.shape)


def _max_eig_sym(m: np.ndarray) -> np.ndarray:
    if m.shape[0] == 1:
        return m[0, 0]
    if m.shape[0] == 2:
        mean = 0.5 * (m[0, 0] + m[1, 1])
        return mean + np.hypot(0.5 * (m[0, 0] - m[1, 1]), m[0, 1])
    return np.linalg.eigvalsh(np.moveaxis(m, (0, 1), (-2, -1)))[..., -1]


def stable_dt(ev: Evaluation, cfg: FlowConfig) -> float:
    """``c_cfl * h_min^2 / max_nodes(Phi'(F) max_i F_i v^2 lambda_max(g^-1))``."""
    h = min(cfg.grid.spacing)
    return cfg.c_cfl * h * h / float(ev.stats[5])


def _initial_sign(res: np.ndarray) -> int:
    tol = 1e-12 * max(1.0, float(np.abs(res).max()))
    if np.all(res >= -tol):
        return 1
    if np.all(res <= tol):
        return -1
    return 0


class Stepper:
    """Owns the evaluator and the per-step monitoring of one configuration."""

    def __init__(self, cfg: FlowConfig, compiled: bool | None = None):
        self.cfg = cfg
        self.evaluate = make_evaluator(cfg, compiled)
        use_kernel = isinstance(self.evaluate, _CompiledEvaluator)
        if use_kernel:
            from ._kernel import advance

            def _flat(u, v, res, dt, lower, upper, direction, out):
                return advance(u.reshape(-1), v, res, dt, lower.reshape(-1), upper.reshape(-1),
                               direction, out.reshape(-1))
            self._advance = _flat
        else:
            self._advance = _advance_numpy
        self.lower = np.ascontiguousarray(cfg.lower.u)
        self.upper = np.ascontiguousarray(cfg.upper.u)
        # expected motion: Lorentzian flows decrease u, Riemannian flows increase it
        self.direction = -1.0 if cfg.model.lorentzian else 1.0
        self.time_factor = math.exp(-cfg.model.psi)

    def initial_state(self) -> FlowState:
        u = self.cfg.initial_field()
        try:
            ev = self.evaluate(u)
        except GUARD_ERRORS as exc:
            raise FlowFailure(f"initial hypersurface not admissible: {exc}",
                              getattr(exc, "node", None), getattr(exc, "kappa", None), 0) from exc
        return FlowState(0.0, u, ev, _initial_sign(ev.residual))

    def advance(self, state: FlowState) -> tuple[FlowState, tuple[float, float, float, float]]:
        """One accepted step plus ``(confinement, monotonicity, min u, max u)`` of the new field."""
        cfg = self.cfg
        dt = stable_dt(state.ev, cfg)
        ev_old = state.ev
        last = None
        u_new = np.empty_like(state.u.u)
        for attempt in range(cfg.retry_limit + 1):
            info = self._advance(state.u.u, ev_old.v, ev_old.residual, dt * self.time_factor,
                                 self.lower, self.upper, self.direction, u_new)
            field_new = GraphField(u_new, state.u.grid)
            try:
                ev = self.evaluate(field_new)
            except GUARD_ERRORS as exc:
                last = exc
                dt *= 0.5
                continue
            new = FlowState(state.t + dt, field_new, ev, state.sign_flag, state.steps + 1, dt, attempt)
            return new, info
        raise FlowFailure(f"step rejected {cfg.retry_limit + 1} times: {last}",
                          getattr(last, "node", None), getattr(last, "kappa", None), state.steps + 1)


def initial_state(cfg: FlowConfig) -> FlowState:
    return Stepper(cfg).initial_state()


def step(state: FlowState, cfg: FlowConfig) -> FlowState:
    """One explicit Euler step ``u += dt * (-e^-psi v (Phi(F) - Phi(f)))``.

    A step that trips a guard (convexity floor, space-likeness, validity
    interval) is retried with half the step; ``FlowFailure`` after
    ``retry_limit`` halvings.
    """
    return Stepper(cfg).advance(state)[0]


def run(cfg: FlowConfig, callback: Callable[[FlowState, TraceRecord], None] | None = None) -> FlowResult:
    """Iterate until ``sup |Phi(F) - Phi(f)| < tol_stationary`` or ``max_steps``."""
    cfg.validate()
    t0 = time.perf_counter()
    trace = FlowTrace()
    monitor = FlowMonitor()
    stepper = Stepper(cfg)
    try:
        state = stepper.initial_state()
    except FlowFailure as exc:
        dummy = FlowState(0.0, cfg.initial_field(), None, 0)  # type: ignore[arg-type]
        return FlowResult(dummy, trace, Verdict.FAILED, monitor, exc, time.perf_counter() - t0)

    u0 = state.u.u
    monitor.initial_sup_residual = state.sup_residual
    monitor.min_kappa = float(state.ev.stats[2])
    monitor.max_vfac = float(state.ev.stats[4])
    monitor.max_confinement_violation = float(max(0.0, (cfg.lower.u - u0).max(), (u0 - cfg.upper.u).max()))
    sign = state.sign_flag

    verdict = Verdict.MAX_STEPS
    failure = None
    while True:
        if state.sup_residual < cfg.tol_stationary:
            verdict = Verdict.CONVERGED
            break
        if state.steps >= cfg.max_steps:
            break
        try:
            state, (conf, mono, umin, umax) = stepper.advance(state)
        except FlowFailure as exc:
            verdict, failure = Verdict.FAILED, exc
            break
        st = state.ev.stats
        if sign > 0:
            sign_viol = max(0.0, -st[0])
        elif sign < 0:
            sign_viol = max(0.0, st[1])
        else:
            sign_viol = 0.0
        trace.append_values(state.t, state.last_dt, max(-st[0], st[1]), st[2], st[3], umin, umax,
                            st[4], sign_viol, state.retries)
        if sign_viol > monitor.max_sign_violation:
            monitor.max_sign_violation = sign_viol
        if mono > monitor.max_monotonicity_violation:
            monitor.max_monotonicity_violation = mono
        if conf > monitor.max_confinement_violation:
            monitor.max_confinement_violation = conf
        if st[2] < monitor.min_kappa:
            monitor.min_kappa = float(st[2])
        if st[4] > monitor.max_vfac:
            monitor.max_vfac = float(st[4])
        monitor.total_retries += state.retries
        if callback is not None:
            callback(state, trace[-1])
    return FlowResult(state, trace, verdict, monitor, failure, time.perf_counter() - t0)
