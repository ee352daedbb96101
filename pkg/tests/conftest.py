import numpy as np
import pytest

from weingarten_flow import (AmbientModel, Base, BaseGrid, CurvatureSpec, FlowConfig, FSpec,
                             GraphField, Signature, Warping)
from weingarten_flow.flow import run


def euclidean_model(n=2):
    return AmbientModel(Signature.RIEMANNIAN, Base.ROUND_SPHERE, Warping.EUCLIDEAN, n=n)


def desitter_model(n=2, base=Base.ROUND_SPHERE):
    return AmbientModel(Signature.LORENTZIAN, base, Warping.DESITTER, n=n)


def euclidean_config(grid=None, u_init=None, **kw):
    grid = grid or BaseGrid.sphere(48, 24)
    init = None if u_init is None else GraphField.constant(grid, u_init)
    return FlowConfig(euclidean_model(), CurvatureSpec(), FSpec("power", a=1.0, p=-2.0), grid,
                      GraphField.constant(grid, 0.5), GraphField.constant(grid, 2.0), u_init=init, **kw)


def desitter_config(grid=None, beta=0.0, **kw):
    grid = grid or BaseGrid.sphere(48, 24)
    return FlowConfig(desitter_model(), CurvatureSpec(), FSpec("power", a=0.5, p=1.0, beta=beta), grid,
                      GraphField.constant(grid, -3.0), GraphField.constant(grid, -0.2), **kw)


@pytest.fixture(scope="session")
def run_euclidean():
    return run(euclidean_config())


@pytest.fixture(scope="session")
def run_desitter():
    return run(desitter_config())


@pytest.fixture(scope="session")
def run_desitter_beta():
    return run(desitter_config(beta=0.5))
