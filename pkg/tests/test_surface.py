import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weingarten_flow.ambient import AmbientModel, Base, DomainError, Signature, Warping
from weingarten_flow.oracles import embedding_h
from weingarten_flow.surface import (BaseGrid, FSpec, FSpecError, GeometryError, GraphField,
                                     SpacelikeError, differentiate, eval_f, induced_geometry,
                                     pencil_eigenvalues, surface_geometry)

R, L = Signature.RIEMANNIAN, Signature.LORENTZIAN
EUCLID = AmbientModel(R, Base.ROUND_SPHERE, Warping.EUCLIDEAN)
DESITTER = AmbientModel(L, Base.ROUND_SPHERE, Warping.DESITTER)


def pencil_residual(geom):
    """max ||(h - kappa_i g) w_i|| over nodes for unit (g-orthonormal) eigenvectors."""
    h = np.moveaxis(geom.h, (0, 1), (-2, -1))
    g = np.moveaxis(geom.g, (0, 1), (-2, -1))
    worst = 0.0
    for i in range(geom.grid.n):
        M = h - geom.kappa[..., i, None, None] * g
        # the null vector of a 2x2 singular matrix is orthogonal to its larger row
        rows = np.where((np.abs(M[..., 0, :]).sum(-1) >= np.abs(M[..., 1, :]).sum(-1))[..., None],
                        M[..., 0, :], M[..., 1, :])
        w = np.stack([-rows[..., 1], rows[..., 0]], axis=-1)
        norm = np.linalg.norm(w, axis=-1, keepdims=True)
        w = np.where(norm > 0, w / np.where(norm > 0, norm, 1.0), [1.0, 0.0])
        worst = max(worst, np.linalg.norm(np.einsum("...ij,...j->...i", M, w), axis=-1).max())
    return worst


def test_sphere_grid_layout_and_weights():
    grid = BaseGrid.sphere(48, 24)
    assert grid.shape == (24, 48) and grid.label == "48x24"
    theta = grid.coords[0, :, 0]
    np.testing.assert_allclose(theta, (np.arange(24) + 0.5) * math.pi / 24)
    assert abs(grid.weights.sum() - 4 * math.pi) <= 1e-10 * 4 * math.pi
    torus = BaseGrid.torus(16)
    assert abs(torus.weights.sum() - (2 * math.pi) ** 2) <= 1e-10 * torus.area


def test_grid_validation():
    with pytest.raises(ValueError):
        BaseGrid.circle(4)
    with pytest.raises(ValueError):
        BaseGrid.sphere(15, 8)
    assert BaseGrid.make(Base.ROUND_SPHERE, 2, (16, 8)) == BaseGrid.sphere(16, 8)
    with pytest.raises(ValueError):
        GraphField(np.ones(5), BaseGrid.circle(8))


def test_differentiate_constant():
    Du, D2 = differentiate(GraphField.constant(BaseGrid.sphere(16, 8), 2.0))
    assert not Du.any() and not D2.any()


def test_circle_derivative_second_order():
    errs = []
    for N in (16, 32, 64):
        grid = BaseGrid.circle(N)
        Du, D2 = differentiate(GraphField.from_function(grid, np.cos))
        errs.append(np.abs(Du[0] + np.sin(grid.coords[0])).max())
    assert errs[0] / errs[1] >= 3.9 and errs[1] / errs[2] >= 3.9


def test_sphere_derivative_second_order_across_poles():
    errs = []
    for n_lon, n_lat in ((16, 8), (32, 16), (64, 32)):
        grid = BaseGrid.sphere(n_lon, n_lat)
        Du, _ = differentiate(GraphField.from_function(grid, lambda th, ph: np.cos(th)))
        errs.append(np.abs(Du[0] + np.sin(grid.coords[0])).max())
        assert np.abs(Du[1]).max() <= 1e-14
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_flat_slice_metric_collapses():
    grid = BaseGrid.sphere(16, 8)
    geom = induced_geometry(GraphField.constant(grid, 2.0), EUCLID)
    th = grid.coords[0]
    np.testing.assert_allclose(geom.g[0, 0], 4.0)
    np.testing.assert_allclose(geom.g[1, 1], 4.0 * np.sin(th) ** 2)
    assert np.all(geom.v == 1.0) and not geom.g[0, 1].any()


def _bump_with_gradient(target, k=1, N=32):
    """``u = b sin(k x1)`` whose discrete gradient at x1 = 0 equals ``target``."""
    h = 2 * math.pi / N
    return target * h / math.sin(k * h)


def test_lorentzian_tilt_example():
    grid = BaseGrid.torus(32)
    model = AmbientModel(L, Base.FLAT_TORUS, Warping.CONSTANT)
    b = _bump_with_gradient(math.sqrt(0.19))
    geom = induced_geometry(GraphField.from_function(grid, lambda x, y: 0.5 + b * np.sin(x)), model)
    assert geom.grad_norm2[0, 0] == pytest.approx(0.19, rel=1e-13)
    assert geom.v[0, 0] == pytest.approx(0.9, rel=1e-13)
    assert geom.vfac[0, 0] == pytest.approx(1 / 0.9, rel=1e-13)
    assert np.all(geom.vfac >= 1.0)


def test_riemannian_tilt_example():
    grid = BaseGrid.circle(32, Base.FLAT_TORUS)
    model = AmbientModel(R, Base.FLAT_TORUS, Warping.EUCLIDEAN, n=1)
    r, k = 5.0, 4
    b = _bump_with_gradient(math.sqrt(3.0) * r, k)
    geom = induced_geometry(GraphField.from_function(grid, lambda x: r + b * np.sin(k * x)), model)
    assert geom.v[0] == pytest.approx(2.0, rel=1e-13)
    assert np.all(geom.v >= 1.0)


def test_spacelike_violation_names_node():
    grid = BaseGrid.torus(16)
    model = AmbientModel(L, Base.FLAT_TORUS, Warping.CONSTANT)
    u = GraphField.from_function(grid, lambda x, y: 2.0 * np.sin(y))
    with pytest.raises(SpacelikeError) as exc:
        induced_geometry(u, model)
    assert exc.value.node is not None and len(exc.value.node) == 2


def test_domain_error_for_negative_radius():
    with pytest.raises(DomainError):
        induced_geometry(GraphField.constant(BaseGrid.sphere(16, 8), -1.0), EUCLID)


@pytest.mark.parametrize("r0", [0.5, 1.0, 4.0])
def test_euclidean_constant_sphere_curvature(r0):
    geom = surface_geometry(GraphField.constant(BaseGrid.sphere(32, 16), r0), EUCLID)
    np.testing.assert_allclose(geom.kappa, 1 / r0, rtol=1e-12)
    assert np.ptp(geom.kappa) <= 1e-8 / r0


def test_flat_torus_constant_is_totally_geodesic():
    model = AmbientModel(L, Base.FLAT_TORUS, Warping.CONSTANT)
    geom = surface_geometry(GraphField.constant(BaseGrid.torus(16), 0.3), model)
    assert not geom.h.any()


@pytest.mark.parametrize("tau", [-0.3, -1.0, -2.5])
def test_desitter_slice_curvature(tau):
    geom = surface_geometry(GraphField.constant(BaseGrid.sphere(16, 8), tau), DESITTER)
    np.testing.assert_allclose(geom.kappa, abs(math.tanh(tau)), rtol=1e-12)


@pytest.mark.parametrize("model,c,amp", [(EUCLID, 1.0, 0.1), (DESITTER, -1.2, 0.05),
                                         (AmbientModel(R, Base.ROUND_SPHERE, Warping.HYPERBOLIC), 0.8, 0.05)])
def test_perturbed_sphere_invariants_and_oracle(model, c, amp):
    grid = BaseGrid.sphere(64, 32)
    func = lambda th, ph: c + amp * np.cos(th) + 0.5 * amp * np.sin(th) ** 2 * np.cos(2 * ph)  # noqa: E731
    geom = surface_geometry(GraphField.from_function(grid, func), model)
    eye = np.einsum("ik...,kj...->ij...", geom.g_inv, geom.g)
    assert np.abs(eye - np.eye(2)[:, :, None, None]).max() <= 1e-10
    assert np.array_equal(geom.h[0, 1], geom.h[1, 0])
    assert pencil_residual(geom) <= 1e-9 * np.abs(geom.h).max()
    assert np.all(np.diff(geom.kappa, axis=-1) >= 0)
    ref = embedding_h(func, grid, model)
    # interior rows: longitude-dependent terms are first order at the poles
    rows = slice(4, -4)
    err = np.abs(geom.kappa[rows] - ref.kappa[rows]).max()
    assert err <= 2e-2 * np.abs(ref.kappa).max()


@given(a=st.floats(0.1, 10), b=st.floats(-5, 5), c=st.floats(0.1, 10))
@settings(max_examples=50, deadline=None)
def test_pencil_closed_form_matches_generalized_eigensolver(a, b, c):
    from scipy.linalg import eigh

    g = np.array([[2.0, 0.3], [0.3, 1.0]])
    h = np.array([[a, b], [b, c]])
    got = pencil_eigenvalues(h[:, :, None], g[:, :, None])[0]
    np.testing.assert_allclose(got, eigh(h, g, eigvals_only=True), rtol=1e-10, atol=1e-12)


def test_pencil_rejects_indefinite_metric():
    g = np.array([[1.0, 2.0], [2.0, 1.0]])[:, :, None]
    with pytest.raises(GeometryError):
        pencil_eigenvalues(np.eye(2)[:, :, None], g)


def test_eval_f_examples():
    assert FSpec("power", a=1.0, p=-2.0)(2.0) == pytest.approx(0.25, rel=1e-15)
    assert FSpec("linear", a=0.0, b=-0.5)(-3.0) == pytest.approx(1.5, rel=1e-15)
    grid = BaseGrid.sphere(16, 8)
    u = GraphField.constant(grid, -1.0)
    geom = induced_geometry(u, DESITTER)
    fs = FSpec("power", a=0.5, p=1.0, beta=0.5)
    assert np.array_equal(eval_f(fs, u, geom), fs.base_value(u.u))


def test_eval_f_rejects_nonpositive():
    with pytest.raises(FSpecError):
        FSpec("linear", a=1.0, b=1.0)(-2.0)
    with pytest.raises(FSpecError):
        FSpec("exp")
