"""Adaptive Crouzeix-Raviart and interior-penalty DG solvers for diffusion
problems with piecewise-constant coefficients, with coefficient-robust
residual error estimators."""
from ._accel import HAVE_NUMBA, backend
from .adapt import AdaptParams, dorfler_mark, run_adaptive
from .coeff import CoefficientField, face_weights, harmonic_average
from .estimate import estimate
from .mesh import Mesh, build_mesh, refine, uniform_refine
from .problems import catalog, get_problem
from .solve import assemble_cr, assemble_dg, solve_spd

__version__ = "0.1.0"

__all__ = [
    "HAVE_NUMBA",
    "backend",
    "AdaptParams",
    "dorfler_mark",
    "run_adaptive",
    "CoefficientField",
    "face_weights",
    "harmonic_average",
    "estimate",
    "Mesh",
    "build_mesh",
    "refine",
    "uniform_refine",
    "catalog",
    "get_problem",
    "assemble_cr",
    "assemble_dg",
    "solve_spd",
]
