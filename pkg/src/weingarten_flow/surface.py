"""Graph hypersurfaces ``x0 = u(x)`` over a discretized base and their geometry.

Node arrays are laid out with the grid shape trailing: tensors of shape
(n, n, *grid.shape), principal curvatures of shape (*grid.shape, n).

Round 2-sphere grids use cell-centred colatitudes (no pole nodes); stencils
crossing a pole read the node on the same colatitude shifted by half a turn
in longitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ambient import AmbientModel, Base, base_metric, foliation_at, orientation

__all__ = [
    "BaseGrid",
    "ConvexityLoss",
    "FSpec",
    "GeometryError",
    "GraphField",
    "SpacelikeError",
    "SurfaceGeometry",
    "covariant_hessian",
    "differentiate",
    "eval_f",
    "induced_geometry",
    "pencil_eigenvalues",
    "second_fundamental_form",
    "surface_geometry",
]

MIN_RESOLUTION = 8


class GeometryError(RuntimeError):
    """Fatal geometric failure at a node (e.g. non-positive-definite metric)."""

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


class SpacelikeError(GeometryError):
    """Lorentzian graph too close to null at some node."""


class ConvexityLoss(GeometryError):
    """Some principal curvature fell to or below the convexity floor."""

    def __init__(self, message: str, node=None, kappa=None):
        super().__init__(message, node)
        self.kappa = kappa


@dataclass(frozen=True, eq=False)
class BaseGrid:
    """Uniform grid on the circle, flat 2-torus, or round 2-sphere.

    ``shape`` is (N,) for n = 1, (N, N) for the torus and (n_lat, n_lon) for
    the sphere; coordinate ``i`` varies along array axis ``i``.
    """

    base: Base
    n: int
    shape: tuple[int, ...]
    coords: np.ndarray = field(repr=False)
    spacing: tuple[float, ...]
    weights: np.ndarray = field(repr=False)

    @classmethod
    def circle(cls, N: int, base: Base = Base.ROUND_SPHERE) -> "BaseGrid":
        _check_res(N)
        h = 2 * math.pi / N
        x = h * np.arange(N)
        return cls(base, 1, (N,), x[None, :], (h,), np.full(N, h))

    @classmethod
    def torus(cls, N: int) -> "BaseGrid":
        _check_res(N)
        h = 2 * math.pi / N
        x = h * np.arange(N)
        X0, X1 = np.meshgrid(x, x, indexing="ij")
        return cls(Base.FLAT_TORUS, 2, (N, N), np.stack([X0, X1]), (h, h), np.full((N, N), h * h))

    @classmethod
    def sphere(cls, n_lon: int, n_lat: int) -> "BaseGrid":
        _check_res(n_lon)
        _check_res(n_lat)
        if n_lon % 2:
            raise ValueError("pole reflection needs an even number of longitudes")
        dth = math.pi / n_lat
        dph = 2 * math.pi / n_lon
        theta = (np.arange(n_lat) + 0.5) * dth
        ph = np.arange(n_lon) * dph
        TH, PH = np.meshgrid(theta, ph, indexing="ij")
        edges = np.arange(n_lat + 1) * dth
        band = np.cos(edges[:-1]) - np.cos(edges[1:])
        weights = np.repeat(band[:, None] * dph, n_lon, axis=1)
        return cls(Base.ROUND_SPHERE, 2, (n_lat, n_lon), np.stack([TH, PH]), (dth, dph), weights)

    @classmethod
    def make(cls, base: Base, n: int, resolution) -> "BaseGrid":
        """``resolution`` is N for n = 1 or the torus, (n_lon, n_lat) for the sphere."""
        if n == 1:
            return cls.circle(int(np.ravel(resolution)[0]), base)
        if base is Base.FLAT_TORUS:
            return cls.torus(int(np.ravel(resolution)[0]))
        n_lon, n_lat = resolution
        return cls.sphere(int(n_lon), int(n_lat))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def area(self) -> float:
        if self.base is Base.ROUND_SPHERE and self.n == 2:
            return 4 * math.pi
        return (2 * math.pi) ** self.n

    @property
    def is_sphere2(self) -> bool:
        return self.base is Base.ROUND_SPHERE and self.n == 2

    @property
    def label(self) -> str:
        if self.is_sphere2:
            return f"{self.shape[1]}x{self.shape[0]}"
        return "x".join(str(s) for s in self.shape)

    def node_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def __eq__(self, other):
        return (isinstance(other, BaseGrid) and self.base is other.base and self.n == other.n
                and self.shape == other.shape)

    def __hash__(self):
        return hash((self.base, self.n, self.shape))


def _check_res(N: int) -> None:
    if N < MIN_RESOLUTION:
        raise ValueError(f"grid resolution must be >= {MIN_RESOLUTION}, got {N}")


@dataclass
class GraphField:
    u: np.ndarray
    grid: BaseGrid

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != self.grid.shape:
            raise ValueError(f"field shape {self.u.shape} does not match grid {self.grid.shape}")

    @classmethod
    def constant(cls, grid: BaseGrid, value: float) -> "GraphField":
        return cls(np.full(grid.shape, float(value)), grid)

    @classmethod
    def from_function(cls, grid: BaseGrid, func) -> "GraphField":
        return cls(np.asarray(func(*grid.coords), dtype=float) * np.ones(grid.shape), grid)

    def copy(self) -> "GraphField":
        return GraphField(self.u.copy(), self.grid)


# --- finite differences ------------------------------------------------------


def _padded(u: np.ndarray, grid: BaseGrid) -> np.ndarray:
    """One layer of ghost values on every side."""
    if grid.n == 1:
        return np.pad(u, 1, mode="wrap")
    if grid.is_sphere2:
        half = grid.shape[1] // 2
        top = np.roll(u[:1], half, axis=1)
        bottom = np.roll(u[-1:], half, axis=1)
        ext = np.concatenate([top, u, bottom], axis=0)
        return np.pad(ext, ((0, 0), (1, 1)), mode="wrap")
    return np.pad(u, 1, mode="wrap")


def differentiate(u: GraphField) -> tuple[np.ndarray, np.ndarray]:
    """Second-order central differences: gradient (n, ...) and raw second partials (n, n, ...)."""
    grid = u.grid
    P = _padded(u.u, grid)
    if grid.n == 1:
        h = grid.spacing[0]
        c, lft, rgt = P[1:-1], P[:-2], P[2:]
        return ((rgt - lft) / (2 * h))[None], ((rgt - 2 * c + lft) / (h * h))[None, None]
    h0, h1 = grid.spacing
    c = P[1:-1, 1:-1]
    n_, s_ = P[:-2, 1:-1], P[2:, 1:-1]
    w_, e_ = P[1:-1, :-2], P[1:-1, 2:]
    Du = np.empty((2,) + grid.shape)
    D2 = np.empty((2, 2) + grid.shape)
    Du[0] = (s_ - n_) / (2 * h0)
    Du[1] = (e_ - w_) / (2 * h1)
    D2[0, 0] = (s_ - 2 * c + n_) / (h0 * h0)
    D2[1, 1] = (e_ - 2 * c + w_) / (h1 * h1)
    D2[0, 1] = D2[1, 0] = (P[2:, 2:] - P[2:, :-2] - P[:-2, 2:] + P[:-2, :-2]) / (4 * h0 * h1)
    return Du, D2


# --- geometry ----------------------------------------------------------------


@dataclass
class SurfaceGeometry:
    grid: BaseGrid
    u: np.ndarray
    Du: np.ndarray
    D2: np.ndarray
    grad_norm2: np.ndarray      # sigma^{ij} u_i u_j
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray              # d_k g_ij, derivative index first
    v: np.ndarray               # sqrt(1 + |Du|^2) resp. sqrt(1 - |Du|^2)
    vfac: np.ndarray            # v (Riemannian) resp. 1/v (Lorentzian)
    nu0: np.ndarray             # x0-component of the reference normal
    hess: np.ndarray | None = None
    h: np.ndarray | None = None
    kappa: np.ndarray | None = None

    @property
    def min_kappa(self) -> float:
        return float(self.kappa.min())

    def convexity_violation(self, kappa_floor: float):
        """``None`` or ``(node, kappa)`` for the worst node with kappa <= floor."""
        kmin = self.kappa.min(axis=-1)
        flat = int(np.argmin(kmin))
        if kmin.flat[flat] > kappa_floor:
            return None
        node = self.grid.node_index(flat)
        return node, self.kappa[node].copy()


def induced_geometry(u: GraphField, model: AmbientModel, delta_space: float = 1e-3) -> SurfaceGeometry:
    """Metric part: gradient, induced metric and inverse, tilt factors, metric derivatives."""
    grid = u.grid
    if grid.n != model.n or grid.base is not model.base:
        raise ValueError("grid and ambient model disagree on the base")
    model.check_x0(u.u)
    n = grid.n
    sig = model.sigma
    Du, D2 = differentiate(u)
    sig_hat, dsig_hat = base_metric(grid.base, grid.coords)
    phi = model.warping.phi(u.u)
    dphi = model.warping.dphi(u.u)
    phi2 = phi * phi
    up = np.empty_like(Du)                       # u^i = sigma^{ij} u_j (diagonal sigma)
    for i in range(n):
        up[i] = Du[i] / (phi2 * sig_hat[i, i])
    norm2 = np.sum(up * Du, axis=0)
    if model.lorentzian:
        bad = norm2 > 1.0 - delta_space
        if np.any(bad):
            flat = int(np.argmax(norm2))
            node = grid.node_index(flat)
            raise SpacelikeError(
                f"graph not uniformly space-like at node {node}: |Du|^2 = {norm2[node]:.6g}", node)
    v2 = 1.0 + sig * norm2
    v = np.sqrt(v2)
    g = np.empty((n, n) + grid.shape)
    g_inv = np.empty_like(g)
    for i in range(n):
        for j in range(n):
            g[i, j] = phi2 * sig_hat[i, j] + sig * Du[i] * Du[j]
            g_inv[i, j] = -sig * up[i] * up[j] / v2
        g_inv[i, i] += 1.0 / (phi2 * sig_hat[i, i])
    two_phi_dphi = 2.0 * phi * dphi
    dg = np.empty((n, n, n) + grid.shape)
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                val = (two_phi_dphi * Du[k] * sig_hat[i, j] + phi2 * dsig_hat[k, i, j]
                       + sig * (D2[i, k] * Du[j] + Du[i] * D2[j, k]))
                dg[k, i, j] = val
                dg[k, j, i] = val
    if model.lorentzian:
        vfac = 1.0 / v
        nu0 = -1.0 / v
    else:
        vfac = v
        nu0 = 1.0 / v
    return SurfaceGeometry(grid, u.u, Du, D2, norm2, g, g_inv, dg, v, vfac, nu0)


def covariant_hessian(u: GraphField, geom: SurfaceGeometry) -> np.ndarray:
    """``u_ij = d_ij u - Gamma^k_ij u_k`` with the induced metric's Christoffel symbols."""
    n = geom.grid.n
    dg = geom.dg
    hess = geom.D2.copy()
    for i in range(n):
        for j in range(i, n):
            # Gamma_{l,ij} = (d_i g_jl + d_j g_il - d_l g_ij) / 2
            corr = 0.0
            for m in range(n):
                gamma_m = 0.0
                for l in range(n):
                    gamma_m = gamma_m + geom.g_inv[m, l] * 0.5 * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                corr = corr + gamma_m * geom.Du[m]
            hess[i, j] = geom.D2[i, j] - corr
            hess[j, i] = hess[i, j]
    return hess


def pencil_eigenvalues(h: np.ndarray, g: np.ndarray, grid: BaseGrid | None = None) -> np.ndarray:
    """Eigenvalues of ``det(h - kappa g) = 0`` per node, ascending, shape (..., n).

    The metric is Cholesky-reduced; n = 2 uses the closed form, n = 3 the
    symmetric eigensolver.
    """
    n = h.shape[0]
    if n == 1:
        if np.any(g[0, 0] <= 0):
            raise GeometryError("metric not positive definite")
        return (h[0, 0] / g[0, 0])[..., None]
    if n == 2:
        l11sq = g[0, 0]
        bad = l11sq <= 0
        l11 = np.sqrt(np.where(bad, 1.0, l11sq))
        l21 = g[0, 1] / l11
        l22sq = g[1, 1] - l21 * l21
        bad = bad | (l22sq <= 0)
        if np.any(bad):
            flat = int(np.argmax(bad))
            node = grid.node_index(flat) if grid is not None else flat
            raise GeometryError(f"induced metric not positive definite at node {node}", node)
        l22 = np.sqrt(l22sq)
        # A = L^-1 h L^-T
        a = h[0, 0] / (l11 * l11)
        b = (h[0, 1] - l21 * h[0, 0] / l11) / (l11 * l22)
        c = (h[1, 1] - 2 * l21 * h[0, 1] / l11 + l21 * l21 * h[0, 0] / (l11 * l11)) / (l22 * l22)
        mean = 0.5 * (a + c)
        rad = np.hypot(0.5 * (a - c), b)
        return np.stack([mean - rad, mean + rad], axis=-1)
    G = np.moveaxis(g, (0, 1), (-2, -1))
    Hm = np.moveaxis(h, (0, 1), (-2, -1))
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("induced metric not positive definite") from exc
    Li = np.linalg.inv(L)
    A = Li @ Hm @ np.swapaxes(Li, -1, -2)
    return np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))


def second_fundamental_form(u: GraphField, geom: SurfaceGeometry, model: AmbientModel):
    """``h_ij`` from the zeroth component of the Gauss formula, and the principal curvatures.

    ``h_ij = s e^psi v (-u_ij - G00 u_i u_j - G0i u_j - G0j u_i - G_ij)`` where
    ``Gab`` are the ambient Christoffel symbols with upper index 0 and ``s`` is
    the calibrated orientation.
    """
    n = geom.grid.n
    if geom.hess is None:
        geom.hess = covariant_hessian(u, geom)
    fol = foliation_at(model, u.u, geom.grid.coords)
    Du = geom.Du
    x0_ij = np.empty_like(geom.hess)
    for i in range(n):
        for j in range(n):
            x0_ij[i, j] = (geom.hess[i, j] + fol.Gamma0_00 * Du[i] * Du[j]
                           + fol.Gamma0_0i[i] * Du[j] + fol.Gamma0_0i[j] * Du[i]
                           + fol.Gamma0_ij[i, j])
    h = -orientation(model.signature) * math.exp(model.psi) * geom.v * x0_ij
    kappa = pencil_eigenvalues(h, geom.g, geom.grid)
    return h, kappa


def surface_geometry(u: GraphField, model: AmbientModel, delta_space: float = 1e-3) -> SurfaceGeometry:
    """Full geometry of ``graph u``."""
    geom = induced_geometry(u, model, delta_space)
    geom.hess = covariant_hessian(u, geom)
    geom.h, geom.kappa = second_fundamental_form(u, geom, model)
    return geom


# --- right-hand side f(x, nu) ------------------------------------------------


class FSpecError(ValueError):
    """Invalid or non-positive prescribed function."""


F_BASES = ("const", "power", "linear")


@dataclass(frozen=True)
class FSpec:
    """``f = base(x0) * vfac^beta``.

    base ``const``: c; ``power``: a |x0|^p; ``linear``: a + b x0.  ``vfac`` is
    the tilt factor of the normal (v resp. 1/v), so ``beta = 0`` gives an
    ``f`` independent of the normal.
    """

    base: str = "const"
    c: float = 1.0
    a: float = 1.0
    p: float = 0.0
    b: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.base not in F_BASES:
            raise FSpecError(f"unknown f base {self.base!r}; expected one of {F_BASES}")

    def base_value(self, x0):
        x0 = np.asarray(x0, dtype=float)
        if self.base == "const":
            return np.full_like(x0, self.c)
        if self.base == "power":
            return self.a * np.abs(x0) ** self.p
        return self.a + self.b * x0

    def __call__(self, x0, vfac=1.0):
        val = self.base_value(x0)
        if self.beta != 0.0:
            val = val * np.asarray(vfac, dtype=float) ** self.beta
        if np.any(~(val > 0)):
            bad = np.asarray(val)
            raise FSpecError(f"prescribed f must be positive, got {bad.min():.6g}")
        return val

    @property
    def normal_independent(self) -> bool:
        return self.beta == 0.0

    def to_config(self) -> dict[str, str]:
        return {k: (self.base if k == "base" else repr(float(getattr(self, k))))
                for k in ("base", "c", "a", "p", "b", "beta")}


def eval_f(fspec: FSpec, u: GraphField, geom: SurfaceGeometry) -> np.ndarray:
    """``f(x, nu)`` at every node of ``graph u``."""
    return fspec(u.u, geom.vfac)
