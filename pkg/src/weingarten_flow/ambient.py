"""Warped-product ambient spaces ``sigma (dx0)^2 + phi(x0)^2 sigma_hat(x)``.

``sigma = +1`` is the Riemannian signature, ``sigma = -1`` the Lorentzian one.
The conformal factor ``psi`` is housed but fixed to zero; the Christoffel
components it would feed are still carried through so that the graph
formulas keep their general shape.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "AmbientModel",
    "Base",
    "DomainError",
    "FoliationData",
    "Signature",
    "Warping",
    "base_metric",
    "convexity_interval",
    "foliation_at",
    "orientation",
    "slice_curvature",
]


class DomainError(ValueError):
    """Coordinate outside the model's validity interval."""


class Signature(Enum):
    RIEMANNIAN = 1
    LORENTZIAN = -1

    @property
    def sigma(self) -> int:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Signature":
        key = name.strip().lower()
        for member in cls:
            if member.name.lower() == key:
                return member
        raise ValueError(f"unknown signature {name!r}")


class Base(Enum):
    ROUND_SPHERE = "RoundSphere"
    FLAT_TORUS = "FlatTorus"

    @classmethod
    def parse(cls, name: str) -> "Base":
        key = name.strip().replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown base {name!r}")


class Warping(Enum):
    EUCLIDEAN = "Euclidean"
    HYPERBOLIC = "Hyperbolic"
    DESITTER = "DeSitter"
    CONSTANT = "Constant"

    @classmethod
    def parse(cls, name: str) -> "Warping":
        key = name.strip().replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown warping {name!r}")

    def phi(self, x0):
        x0 = np.asarray(x0, dtype=float)
        if self is Warping.EUCLIDEAN:
            return x0.copy()
        if self is Warping.HYPERBOLIC:
            return np.sinh(x0)
        if self is Warping.DESITTER:
            return np.cosh(x0)
        return np.ones_like(x0)

    def dphi(self, x0):
        x0 = np.asarray(x0, dtype=float)
        if self is Warping.EUCLIDEAN:
            return np.ones_like(x0)
        if self is Warping.HYPERBOLIC:
            return np.cosh(x0)
        if self is Warping.DESITTER:
            return np.sinh(x0)
        return np.zeros_like(x0)

    def d2phi(self, x0):
        x0 = np.asarray(x0, dtype=float)
        if self is Warping.HYPERBOLIC:
            return np.sinh(x0)
        if self is Warping.DESITTER:
            return np.cosh(x0)
        return np.zeros_like(x0)

    @property
    def natural_interval(self) -> tuple[float, float]:
        if self in (Warping.EUCLIDEAN, Warping.HYPERBOLIC):
            return (0.0, math.inf)
        return (-math.inf, math.inf)

    @property
    def increasing_region(self) -> tuple[float, float] | None:
        """Where ``phi' > 0``."""
        if self in (Warping.EUCLIDEAN, Warping.HYPERBOLIC):
            return (-math.inf, math.inf)
        if self is Warping.DESITTER:
            return (0.0, math.inf)
        return None

    @property
    def decreasing_region(self) -> tuple[float, float] | None:
        """Where ``phi' < 0``."""
        if self is Warping.DESITTER:
            return (-math.inf, 0.0)
        return None


@dataclass(frozen=True)
class AmbientModel:
    signature: Signature
    base: Base
    warping: Warping
    n: int = 2
    interval: tuple[float, float] | None = None
    psi: float = 0.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"grids support n in (1, 2), got {self.n}")
        if self.psi != 0.0:
            raise ValueError("only psi == 0 is supported")
        if self.signature is Signature.RIEMANNIAN and self.warping not in (
            Warping.EUCLIDEAN, Warping.HYPERBOLIC
        ):
            raise ValueError("Riemannian models need nonpositive sectional curvature "
                             "(warping Euclidean or Hyperbolic)")
        lo, hi = self.warping.natural_interval
        if self.interval is not None:
            ulo, uhi = self.interval
            if not ulo < uhi:
                raise ValueError(f"empty validity interval {self.interval}")
            lo, hi = max(lo, ulo), min(hi, uhi)
            if not lo < hi:
                raise ValueError(f"validity interval {self.interval} misses the warping's domain")
        object.__setattr__(self, "interval", (lo, hi))

    @property
    def sigma(self) -> int:
        return self.signature.sigma

    @property
    def lorentzian(self) -> bool:
        return self.signature is Signature.LORENTZIAN

    def check_x0(self, x0) -> None:
        x0 = np.asarray(x0, dtype=float)
        lo, hi = self.interval
        bad = ~((x0 > lo) & (x0 < hi))
        if np.any(bad):
            idx = tuple(int(i) for i in np.argwhere(bad)[0]) if x0.ndim else ()
            raise DomainError(f"x0 = {x0[idx]:.6g} outside validity interval ({lo}, {hi}) at node {idx}")

    def metric(self, x0, coords) -> np.ndarray:
        """Ambient metric components, shape (n+1, n+1, ...)."""
        coords = np.asarray(coords, dtype=float)
        x0 = np.broadcast_to(np.asarray(x0, dtype=float), coords.shape[1:])
        sig_hat = base_metric(self.base, coords)[0]
        out = np.zeros((self.n + 1, self.n + 1) + x0.shape)
        out[0, 0] = self.sigma
        out[1:, 1:] = self.warping.phi(x0) ** 2 * sig_hat
        return np.exp(2 * self.psi) * out

    def to_config(self) -> dict[str, str]:
        return {
            "signature": self.signature.name.lower(),
            "base": self.base.value,
            "warping": self.warping.value,
            "x0_min": repr(self.interval[0]),
            "x0_max": repr(self.interval[1]),
        }


def base_metric(base: Base, coords) -> tuple[np.ndarray, np.ndarray]:
    """Unit base metric ``sigma_hat_ij`` and its partials ``d_k sigma_hat_ij``.

    ``coords`` has shape (n, ...); for the round 2-sphere the coordinates are
    (colatitude, longitude).  Returns arrays of shape (n, n, ...) and
    (n, n, n, ...) with the derivative index first.
    """
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]
    shape = coords.shape[1:]
    sig = np.zeros((n, n) + shape)
    dsig = np.zeros((n, n, n) + shape)
    for i in range(n):
        sig[i, i] = 1.0
    if base is Base.ROUND_SPHERE and n == 2:
        theta = coords[0]
        sig[1, 1] = np.sin(theta) ** 2
        dsig[0, 1, 1] = 2.0 * np.sin(theta) * np.cos(theta)
    return sig, dsig


@dataclass
class FoliationData:
    """Geometry of the coordinate slices at given nodes (arrays over nodes)."""

    sigma_ij: np.ndarray
    sigma_inv: np.ndarray
    Gamma0_ij: np.ndarray
    Gamma0_00: np.ndarray
    Gamma0_0i: np.ndarray
    hbar_ij: np.ndarray


def foliation_at(model: AmbientModel, x0, coords) -> FoliationData:
    """Slice metric, upper-zero Christoffel symbols and slice second fundamental form.

    With ``gbar = sigma dx0^2 + phi^2 sigma_hat``:
    ``Gamma^0_ij = -sigma phi phi' sigma_hat_ij``, ``Gamma^0_00 = d0 psi``,
    ``Gamma^0_0i = d_i psi`` and ``hbar_ij = -s Gamma^0_ij`` with the
    calibrated orientation ``s``.
    """
    x0 = np.asarray(x0, dtype=float)
    coords = np.asarray(coords, dtype=float)
    model.check_x0(x0)
    n = model.n
    if coords.shape[0] != n:
        raise ValueError(f"coords must have leading dimension {n}")
    x0 = np.broadcast_to(x0, coords.shape[1:])
    sig_hat, _ = base_metric(model.base, coords)
    phi = model.warping.phi(x0)
    dphi = model.warping.dphi(x0)
    sigma_ij = phi ** 2 * sig_hat
    sigma_inv = np.zeros_like(sigma_ij)
    for i in range(n):
        sigma_inv[i, i] = 1.0 / sigma_ij[i, i]
    gamma_ij = -model.sigma * phi * dphi * sig_hat
    # psi == 0: its derivatives vanish identically
    gamma_00 = np.zeros(x0.shape)
    gamma_0i = np.zeros((n,) + x0.shape)
    hbar = -orientation(model.signature) * gamma_ij
    return FoliationData(sigma_ij, sigma_inv, gamma_ij, gamma_00, gamma_0i, hbar)


def slice_curvature(model: AmbientModel, x0) -> np.ndarray:
    """Umbilic factor of the slice ``{x0 = const}`` (its principal curvature)."""
    x0 = np.asarray(x0, dtype=float)
    return (orientation(model.signature) * model.sigma
            * model.warping.dphi(x0) / model.warping.phi(x0))


def _intersect(a, b):
    if a is None or b is None:
        return None
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi) if lo < hi else None


def convexity_interval(model: AmbientModel) -> tuple[float, float] | None:
    """x0-interval of strictly convex slices, ``None`` when empty."""
    s = orientation(model.signature) * model.sigma
    region = model.warping.increasing_region if s > 0 else model.warping.decreasing_region
    return _intersect(region, model.interval)


@functools.cache
def orientation(signature: Signature) -> float:
    """Sign tying ``hbar`` to ``-Gamma^0_ij``, fixed against the embedding oracle.

    Riemannian: the unit Euclidean sphere must have curvature +1.
    Lorentzian: de Sitter slices are compared with the hyperboloid embedding
    using the past-directed normal.
    """
    from . import oracles

    if signature is Signature.RIEMANNIAN:
        x0, warping = 1.0, Warping.EUCLIDEAN
    else:
        x0, warping = -1.0, Warping.DESITTER
    reference = oracles.slice_principal_curvature(signature, warping, x0)
    # uncalibrated slice value: hbar = -Gamma^0_ij, over the slice metric
    raw = signature.sigma * warping.dphi(x0) / warping.phi(x0)
    if abs(reference) < 1e-12 or abs(raw) < 1e-12:
        raise RuntimeError("orientation calibration degenerate")
    return float(np.sign(reference / raw))
