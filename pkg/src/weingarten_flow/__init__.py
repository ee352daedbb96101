"""Curvature flows of strictly convex graphs in warped-product spaces.

Modules: ``curvfunc`` (curvature functions and their certification),
``ambient`` (warped-product models), ``surface`` (grids and graph geometry),
``flow`` (the scalar flow), ``barriers``, ``oracles`` (independent
references), ``config``/``fieldio``/``cli`` (batch front end).
"""

from .ambient import AmbientModel, Base, Signature, Warping
from .barriers import check_barriers
from .curvfunc import CurvatureSpec, Family, check_classK, estimate_eps0
from .flow import FlowConfig, Phi, Verdict, run
from .surface import BaseGrid, FSpec, GraphField, surface_geometry

__version__ = "0.1.0"

__all__ = [
    "AmbientModel",
    "Base",
    "BaseGrid",
    "CurvatureSpec",
    "FSpec",
    "Family",
    "FlowConfig",
    "GraphField",
    "Phi",
    "Signature",
    "Verdict",
    "Warping",
    "check_barriers",
    "check_classK",
    "estimate_eps0",
    "run",
    "surface_geometry",
]
