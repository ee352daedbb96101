"""Brute-force references, independent of the solver's geometry code.

The embedding oracle realizes each supported ambient model inside a flat
space (Euclidean or Minkowski), pushes an analytic graph through the
embedding and reads the second fundamental form off the Gauss formula
``x_ij = -sigma h_ij nu`` using high-order differences of the analytic map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .ambient import AmbientModel, Base, Signature, Warping

__all__ = [
    "EmbeddingOracleResult",
    "OracleError",
    "embedding_h",
    "fd_gradient_F",
    "fd_hessian_F",
    "slice_principal_curvature",
    "stationary_slice",
]

FD_STEP = 1e-5
EMBED_STEP = 1e-3


class OracleError(ValueError):
    """The oracle cannot handle the request."""


# --- embeddings --------------------------------------------------------------


def _unit_vector(coords: np.ndarray, base: Base) -> np.ndarray:
    """Point of the unit base sphere/circle in R^{n+1}; shape (n+1, ...)."""
    if coords.shape[0] == 1:
        ph = coords[0]
        return np.stack([np.cos(ph), np.sin(ph)])
    th, ph = coords
    return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])


def _chart(model_sig: Signature, warping: Warping, base: Base, n: int):
    """Return ``(eta, embed, constraint)``.

    ``embed(x0, coords)`` maps to the flat space with metric ``diag(eta)``;
    ``constraint(X)`` is a vector the normal must be eta-orthogonal to
    (``None`` when the model fills the flat space).
    """
    lor = np.array([-1.0] + [1.0] * (n + 1))
    if warping is Warping.EUCLIDEAN and base is Base.ROUND_SPHERE:
        return np.ones(n + 1), (lambda r, c: r * _unit_vector(c, base)), None
    if warping is Warping.HYPERBOLIC and base is Base.ROUND_SPHERE:
        def embed(r, c):
            return np.concatenate([np.cosh(r)[None], np.sinh(r) * _unit_vector(c, base)])
        return lor, embed, (lambda X: X)
    if warping is Warping.DESITTER and base is Base.ROUND_SPHERE:
        def embed(t, c):
            return np.concatenate([np.sinh(t)[None], np.cosh(t) * _unit_vector(c, base)])
        return lor, embed, (lambda X: X)
    if warping is Warping.CONSTANT and model_sig is Signature.LORENTZIAN:
        if base is Base.FLAT_TORUS:
            eta = np.array([-1.0] + [1.0] * n)
            return eta, (lambda t, c: np.concatenate([t[None], c])), None
        # static cylinder R x S^n inside R^{1,n+1}
        def embed(t, c):
            return np.concatenate([t[None], _unit_vector(c, base)])

        def constraint(X):
            out = X.copy()
            out[0] = 0.0
            return out
        return lor, embed, constraint
    raise OracleError(f"no embedding chart for {model_sig.name} {warping.value} over {base.value}")


def _partials(func, coords: np.ndarray, step: float):
    """Fourth-order differences of ``func(coords)`` (values (m, ...)): first and second partials."""
    n = coords.shape[0]
    w1 = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}
    w2 = {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: -1 / 12}
    cache = {}

    def at(offset):
        if offset not in cache:
            shifted = coords.copy()
            for k, o in enumerate(offset):
                shifted[k] = shifted[k] + o * step
            cache[offset] = func(shifted)
        return cache[offset]

    zero = (0,) * n
    base_val = at(zero)
    d1 = [sum(w * at(tuple(o if k == i else 0 for k in range(n))) for o, w in w1.items()) / step
          for i in range(n)]
    d2 = [[None] * n for _ in range(n)]
    for i in range(n):
        d2[i][i] = sum(w * at(tuple(o if k == i else 0 for k in range(n))) for o, w in w2.items()) / step**2
        for j in range(i + 1, n):
            acc = 0.0
            for oi, wi in w1.items():
                for oj, wj in w1.items():
                    off = tuple(oi if k == i else oj if k == j else 0 for k in range(n))
                    acc = acc + wi * wj * at(off)
            d2[i][j] = d2[j][i] = acc / step**2
    return base_val, d1, d2


@dataclass
class EmbeddingOracleResult:
    h: np.ndarray               # (n, n, ...)
    g: np.ndarray               # (n, n, ...)
    kappa: np.ndarray           # (..., n) ascending
    weingarten_residual: float  # max over nodes of |nu_i - h_i^k x_k| / |x_i|


def _normal(dX, eta, X, constraint, dX0):
    """Unit normal field, oriented along the x0 direction; shape (m, ...)."""
    rows = [eta[:, None] * d.reshape(d.shape[0], -1) for d in dX]
    if constraint is not None:
        rows.append(eta[:, None] * constraint(X).reshape(X.shape[0], -1))
    A = np.stack(rows, axis=0)                     # (rows, m, nodes)
    A = np.moveaxis(A, -1, 0)                      # (nodes, rows, m)
    A = A / np.linalg.norm(A, axis=-1, keepdims=True)
    _, _, vt = np.linalg.svd(A)
    nu = vt[:, -1, :].T                            # (m, nodes)
    q = np.sum(eta[:, None] * nu * nu, axis=0)
    nu = nu / np.sqrt(np.abs(q))
    orient = np.sign(np.sum(eta[:, None] * nu * dX0.reshape(dX0.shape[0], -1), axis=0))
    nu = nu * orient
    return nu.reshape(X.shape), np.sign(q).reshape(X.shape[1:])


def embedding_h(u, grid_or_coords, model: AmbientModel, step: float = EMBED_STEP,
                weingarten: bool = True) -> EmbeddingOracleResult:
    """Second fundamental form of an analytic graph from an explicit embedding.

    ``u`` is a constant or a vectorized callable ``u(*coords)``; the graph is
    evaluated at the nodes of ``grid_or_coords`` (a BaseGrid or a coordinate
    array of shape (n, ...)).  Orientation: outward normal (Riemannian) resp.
    past-directed normal (Lorentzian), ``h`` taken with respect to
    ``-sigma nu``; round Euclidean spheres get curvature ``+1/r``.
    """
    coords = getattr(grid_or_coords, "coords", grid_or_coords)
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]
    if not callable(u):
        value = float(u)
        u_func = lambda *c: np.full(np.shape(c[0]), value)  # noqa: E731
    else:
        u_func = u
    eta, embed, constraint = _chart(model.signature, model.warping, model.base, n)

    def X_of(c):
        return embed(np.asarray(u_func(*c), dtype=float) * np.ones(c.shape[1:]), c)

    X, dX, d2X = _partials(X_of, coords, step)
    # dE/dx0 at fixed base point, for orientation
    x0 = np.asarray(u_func(*coords), dtype=float) * np.ones(coords.shape[1:])
    dX0 = (embed(x0 + step, coords) - embed(x0 - step, coords)) / (2 * step)
    nu, qsign = _normal(dX, eta, X, constraint, dX0)
    if np.any(qsign != model.sigma):
        raise OracleError("normal has the wrong causal character (graph not space-like?)")

    def ip(a, b):
        return np.tensordot(eta, a * b, axes=(0, 0))

    g = np.empty((n, n) + coords.shape[1:])
    h = np.empty_like(g)
    for i in range(n):
        for j in range(n):
            g[i, j] = ip(dX[i], dX[j])
            h[i, j] = -ip(d2X[i][j], nu)
    G = np.moveaxis(g, (0, 1), (-2, -1))
    Hm = np.moveaxis(h, (0, 1), (-2, -1))
    shape_op = np.linalg.solve(G, Hm)              # h^k_i as (.., k, i)
    kappa = np.sort(np.real(np.linalg.eigvals(shape_op)), axis=-1)

    if not weingarten:
        return EmbeddingOracleResult(h=h, g=g, kappa=kappa, weingarten_residual=float("nan"))

    # Weingarten consistency nu_i = h_i^k x_k
    def nu_of(c):
        Xc, dXc, _ = _partials_first(X_of, c, step)
        xc0 = np.asarray(u_func(*c), dtype=float) * np.ones(c.shape[1:])
        d0 = (embed(xc0 + step, c) - embed(xc0 - step, c)) / (2 * step)
        return _normal(dXc, eta, Xc, constraint, d0)[0]

    _, dnu, _ = _partials_first(nu_of, coords, step)
    resid = 0.0
    for i in range(n):
        pred = sum(shape_op[..., k, i] * dX[k] for k in range(n))
        scale = np.sqrt(np.abs(ip(dX[i], dX[i])))
        resid = max(resid, float(np.max(np.sqrt(np.sum((dnu[i] - pred) ** 2, axis=0)) / scale)))
    return EmbeddingOracleResult(h=h, g=g, kappa=kappa, weingarten_residual=resid)


def _partials_first(func, coords, step):
    n = coords.shape[0]
    w1 = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}
    out = []
    for i in range(n):
        acc = 0.0
        for o, w in w1.items():
            shifted = coords.copy()
            shifted[i] = shifted[i] + o * step
            acc = acc + w * func(shifted)
        out.append(acc / step)
    return func(coords), out, None


def slice_principal_curvature(signature: Signature, warping: Warping, x0):
    """Principal curvature of the slice ``{x0 = const}`` from the embedding oracle.

    Vectorized over ``x0``; every value is probed at the same base point.
    """
    base = Base.FLAT_TORUS if warping is Warping.CONSTANT else Base.ROUND_SPHERE
    model = AmbientModel(signature, base, warping, n=2)
    x0 = np.asarray(x0, dtype=float)
    flat = np.atleast_1d(x0).ravel()
    point = np.empty((2, flat.size))
    point[0], point[1] = 0.9, 0.3
    res = embedding_h(lambda *c: flat, point, model, weingarten=False)
    kap = np.mean(res.kappa, axis=-1)
    return float(kap[0]) if x0.ndim == 0 else kap.reshape(x0.shape)


# --- curvature-function differences -----------------------------------------


def _F(spec, k):
    from .curvfunc import F_and_grad
    return F_and_grad(spec, k)[0]


def _steps(spec, kappa, rel):
    kappa = np.asarray(kappa, dtype=float)
    h = rel * np.abs(kappa)
    if np.any(kappa - 10 * h <= spec.kappa_min):
        raise OracleError("kappa too close to the cone boundary for the difference step")
    return kappa, h


def fd_gradient_F(spec, kappa, rel_step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of ``F``; step ``rel_step * |kappa_i|`` per component."""
    kappa, h = _steps(spec, kappa, rel_step)
    n = kappa.shape[-1]
    out = np.empty_like(kappa)
    for i in range(n):
        kp = kappa.copy()
        km = kappa.copy()
        kp[..., i] += h[..., i]
        km[..., i] -= h[..., i]
        out[..., i] = (_F(spec, kp) - _F(spec, km)) / (2 * h[..., i])
    return out


def _fd_hessian(spec, kappa, h):
    n = kappa.shape[-1]
    out = np.empty(kappa.shape + (n,))
    F0 = _F(spec, kappa)
    for i in range(n):
        kp = kappa.copy()
        km = kappa.copy()
        kp[..., i] += h[..., i]
        km[..., i] -= h[..., i]
        out[..., i, i] = (_F(spec, kp) - 2 * F0 + _F(spec, km)) / h[..., i] ** 2
        for j in range(i + 1, n):
            acc = 0.0
            for si, sj, w in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                k = kappa.copy()
                k[..., i] += si * h[..., i]
                k[..., j] += sj * h[..., j]
                acc = acc + w * _F(spec, k)
            out[..., i, j] = out[..., j, i] = acc / (4 * h[..., i] * h[..., j])
    return out


def fd_hessian_F(spec, kappa, rel_step: float = 1e-3, richardson: bool = True) -> np.ndarray:
    """Central-difference Hessian of ``F``, optionally Richardson-extrapolated."""
    kappa, h = _steps(spec, kappa, rel_step)
    coarse = _fd_hessian(spec, kappa, h)
    if not richardson:
        return coarse
    fine = _fd_hessian(spec, kappa, 0.5 * h)
    return (4 * fine - coarse) / 3


# --- umbilic stationary slices -----------------------------------------------


def _scan_points(interval, top):
    lo, hi = interval
    mags = np.logspace(-6, np.log10(top), 2000)
    if lo >= 0:
        pts = lo + mags
    elif hi <= 0:
        pts = hi - mags
    else:
        pts = np.concatenate([-mags[::-1], mags])
    return pts[(pts > lo) & (pts < hi)]


def stationary_slice(model: AmbientModel, fspec, tol: float = 1e-10) -> float:
    """x0 of the slice solving ``kappa_slice(x0) = f(x0)`` on the convex range.

    Root bracketed by a scan outward from the inner end of the range, then
    refined by bisection.
    """
    lo, hi = model.interval
    # exponential warpings lose the normal's causal character to cancellation far out
    top = 1e4 if model.warping is Warping.EUCLIDEAN else 12.0
    pts = _scan_points((lo, hi), top)
    kap = slice_principal_curvature(model.signature, model.warping, pts)
    diff = kap - fspec.base_value(pts)
    convex = kap > 0
    for a, b, da, db, ca, cb in zip(pts[:-1], pts[1:], diff[:-1], diff[1:], convex[:-1], convex[1:]):
        if ca and cb and da * db <= 0:
            if da == 0:
                return float(a)
            fn = lambda x: slice_principal_curvature(model.signature, model.warping, x) - float(fspec.base_value(x))  # noqa: E731
            lo_b, hi_b = (a, b) if a < b else (b, a)
            return float(optimize.bisect(fn, lo_b, hi_b, xtol=tol, maxiter=500))
    raise OracleError("no sign change of kappa_slice - f on the convex range")
