"""Barrier validation for a pair of graphs bounding the flow region."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambient import AmbientModel, DomainError
from .curvfunc import CurvatureSpec, F_and_grad
from .surface import FSpec, GeometryError, GraphField, eval_f, surface_geometry

__all__ = ["BarrierOrderError", "BarrierReport", "ConfigError", "check_barriers"]


class ConfigError(ValueError):
    """Inconsistent run configuration."""


class BarrierOrderError(ConfigError):
    """Lower barrier not below the upper one."""


@dataclass
class BarrierReport:
    is_upper_valid: bool
    is_lower_valid: bool
    upper_margin: float                 # min over nodes of F - f on the upper barrier
    lower_margin: float | None          # max over the convex set of F - f on the lower barrier
    sigma_nodes: np.ndarray             # boolean mask of strictly convex lower-barrier nodes
    upper_convexity: float              # min kappa on the upper barrier
    lower_convexity: float              # min kappa on the lower barrier
    notes: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.is_upper_valid and self.is_lower_valid

    @property
    def sigma_count(self) -> int:
        return int(self.sigma_nodes.sum())

    def summary(self) -> dict:
        return {
            "upper_valid": self.is_upper_valid,
            "lower_valid": self.is_lower_valid,
            "upper_margin": self.upper_margin,
            "lower_margin": self.lower_margin,
            "convex_lower_nodes": self.sigma_count,
            "upper_min_kappa": self.upper_convexity,
            "lower_min_kappa": self.lower_convexity,
            "notes": list(self.notes),
        }


def _F_minus_f(u: GraphField, geom, spec: CurvatureSpec, fspec: FSpec, mask: np.ndarray) -> np.ndarray:
    out = np.full(u.grid.shape, np.nan)
    if np.any(mask):
        F, _ = F_and_grad(spec, geom.kappa[mask])
        out[mask] = F - eval_f(fspec, u, geom)[mask]
    return out


def check_barriers(u1: GraphField, u2: GraphField, model: AmbientModel, spec: CurvatureSpec,
                   fspec: FSpec, kappa_floor: float = 1e-8, delta_space: float = 1e-3) -> BarrierReport:
    """Check ``u2`` as upper and ``u1`` as lower barrier.

    The upper barrier must be strictly convex everywhere with ``F >= f``;
    the lower barrier needs ``F <= f`` only where it is strictly convex (a
    set that may be empty).  ``f`` sees each barrier's own normal.
    """
    if u1.grid != u2.grid:
        raise ConfigError("barriers live on different grids")
    if np.any(u1.u > u2.u):
        node = u1.grid.node_index(int(np.argmax(u1.u - u2.u)))
        raise BarrierOrderError(
            f"lower barrier above upper barrier at node {node}: {u1.u[node]:.6g} > {u2.u[node]:.6g}")
    notes = []

    try:
        g2 = surface_geometry(u2, model, delta_space)
    except (GeometryError, DomainError) as exc:
        g2 = None
        notes.append(f"upper barrier geometry invalid: {exc}")
    if g2 is not None:
        kmin2 = g2.kappa.min(axis=-1)
        convex2 = kmin2 > kappa_floor
        diff2 = _F_minus_f(u2, g2, spec, fspec, convex2)
        upper_ok = bool(np.all(convex2)) and bool(np.all(diff2 >= 0))
        upper_margin = float(np.nanmin(diff2)) if np.any(convex2) else float("nan")
        upper_conv = float(kmin2.min())
        if not np.all(convex2):
            notes.append("upper barrier not strictly convex")
    else:
        upper_ok, upper_margin, upper_conv = False, float("nan"), float("nan")

    try:
        g1 = surface_geometry(u1, model, delta_space)
    except (GeometryError, DomainError) as exc:
        g1 = None
        notes.append(f"lower barrier geometry invalid: {exc}")
    if g1 is not None:
        kmin1 = g1.kappa.min(axis=-1)
        sigma = kmin1 > kappa_floor
        diff1 = _F_minus_f(u1, g1, spec, fspec, sigma)
        lower_ok = bool(np.all(diff1[sigma] <= 0))
        lower_margin = float(np.max(diff1[sigma])) if np.any(sigma) else None
        lower_conv = float(kmin1.min())
        if not np.any(sigma):
            notes.append("lower barrier has no strictly convex points; valid vacuously")
    else:
        lower_ok, lower_margin, lower_conv = False, None, float("nan")
        sigma = np.zeros(u1.grid.shape, dtype=bool)

    return BarrierReport(upper_ok, lower_ok, upper_margin, lower_margin, sigma,
                         upper_conv, lower_conv, notes)
