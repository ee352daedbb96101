import math

import numpy as np
import pytest

from weingarten_flow.ambient import AmbientModel, Base, Signature, Warping
from weingarten_flow.curvfunc import CurvatureSpec, F_and_grad, F_grad_hess, Family, sample_cone
from weingarten_flow.oracles import (OracleError, embedding_h, fd_gradient_F, fd_hessian_F,
                                     slice_principal_curvature, stationary_slice)
from weingarten_flow.surface import BaseGrid, FSpec

R, L = Signature.RIEMANNIAN, Signature.LORENTZIAN
GRID = BaseGrid.sphere(16, 8)


@pytest.mark.parametrize("r0", [0.25, 1.0, 3.0])
def test_euclidean_sphere_curvature(r0):
    res = embedding_h(r0, GRID, AmbientModel(R, Base.ROUND_SPHERE, Warping.EUCLIDEAN))
    np.testing.assert_allclose(res.kappa, 1 / r0, rtol=1e-8)
    assert res.weingarten_residual <= 1e-8


def test_flat_torus_slice_has_zero_h():
    res = embedding_h(0.4, BaseGrid.torus(8), AmbientModel(L, Base.FLAT_TORUS, Warping.CONSTANT))
    assert np.abs(res.h).max() <= 1e-9


@pytest.mark.parametrize("sig,warping,x0", [(R, Warping.HYPERBOLIC, 0.7), (L, Warping.DESITTER, -1.1),
                                            (L, Warping.DESITTER, 0.9)])
def test_analytic_slices(sig, warping, x0):
    res = embedding_h(x0, GRID, AmbientModel(sig, Base.ROUND_SPHERE, warping))
    expect = math.cosh(x0) / math.sinh(x0) if warping is Warping.HYPERBOLIC else -math.tanh(x0)
    np.testing.assert_allclose(res.kappa, expect, rtol=1e-8)
    # the Minkowski charts carry cosh/sinh sized coordinates, so difference noise is a bit larger
    assert res.weingarten_residual <= 5e-8
    assert slice_principal_curvature(sig, warping, x0) == pytest.approx(expect, rel=1e-8)


def test_perturbed_graph_weingarten_consistency():
    func = lambda th, ph: 1.0 + 0.1 * np.cos(th)  # noqa: E731
    res = embedding_h(func, GRID, AmbientModel(R, Base.ROUND_SPHERE, Warping.EUCLIDEAN))
    assert res.weingarten_residual <= 1e-8
    assert np.all(res.kappa > 0)


def test_gradient_of_mean_and_gauss_root():
    kappa = sample_cone(3, 30, np.random.default_rng(0))
    np.testing.assert_allclose(fd_gradient_F(CurvatureSpec(Family.MEAN), kappa), 1 / 3, rtol=1e-6)
    # second differences amplify round-off by 1/h^2, so use well-scaled points
    hess = fd_hessian_F(CurvatureSpec(Family.MEAN), sample_cone(3, 30, np.random.default_rng(0), low=0.5, high=2.0))
    assert np.abs(hess).max() <= 1e-6
    np.testing.assert_allclose(fd_gradient_F(CurvatureSpec(), np.array([1.0, 1.0])), 0.5, rtol=1e-9)


@pytest.mark.parametrize("spec", [CurvatureSpec(), CurvatureSpec(Family.QUOTIENT),
                                  CurvatureSpec(Family.PRODUCT_GK, a=2.0)], ids=lambda s: s.describe())
def test_gradient_oracle_agrees_with_analytic(spec):
    kappa = sample_cone(3, 200, np.random.default_rng(1))
    _, grad = F_and_grad(spec, kappa)
    rel = np.abs(fd_gradient_F(spec, kappa) - grad) / np.abs(grad)
    assert rel.max() <= 1e-6


def test_gauss_root_hessian_closed_form():
    kappa = sample_cone(2, 20, np.random.default_rng(2), low=0.1, high=10.0)
    F = np.sqrt(kappa[:, 0] * kappa[:, 1])
    closed = np.empty((20, 2, 2))
    closed[:, 0, 0] = -F / (4 * kappa[:, 0] ** 2)
    closed[:, 1, 1] = -F / (4 * kappa[:, 1] ** 2)
    closed[:, 0, 1] = closed[:, 1, 0] = F / (4 * kappa[:, 0] * kappa[:, 1])
    fd = fd_hessian_F(CurvatureSpec(), kappa)
    assert np.abs(fd - closed).max() <= 1e-6 * np.abs(closed).max()
    np.testing.assert_allclose(F_grad_hess(CurvatureSpec(), kappa)[2], closed, rtol=1e-12, atol=1e-15)


def test_margin_violation():
    with pytest.raises(OracleError):
        fd_gradient_F(CurvatureSpec(kappa_min=0.5), np.array([0.5000001, 1.0]))


def test_stationary_slices():
    euclid = AmbientModel(R, Base.ROUND_SPHERE, Warping.EUCLIDEAN)
    assert stationary_slice(euclid, FSpec("power", a=1.0, p=-2.0)) == pytest.approx(1.0, abs=1e-9)
    assert stationary_slice(euclid, FSpec(c=0.5)) == pytest.approx(2.0, abs=1e-9)
    tau = stationary_slice(AmbientModel(L, Base.ROUND_SPHERE, Warping.DESITTER), FSpec("power", a=0.5, p=1.0))
    assert tau < 0
    assert abs(tau) == pytest.approx(1.91501, abs=5e-6)
    assert math.tanh(abs(tau)) == pytest.approx(abs(tau) / 2, abs=1e-9)


def test_stationary_slice_without_root():
    with pytest.raises(OracleError):
        stationary_slice(AmbientModel(L, Base.ROUND_SPHERE, Warping.DESITTER), FSpec(c=5.0))
