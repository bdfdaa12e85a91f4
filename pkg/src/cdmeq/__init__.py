"""Matrix-equation solvers and preconditioners for separable convection-diffusion problems."""
from .discretize import (
    Dirichlet,
    Grid,
    MultitermEquation,
    SeparableWind,
    assemble_2d,
    assemble_3d,
    assemble_3d_zsplit,
    kron_expand,
    mesh_peclet,
)
from .krylov import KrylovConfig, LinearOperator, SolveReport, fgmres, gmres
from .linalg_core import CsrMatrix, LowRankFactor
from .precond import PrecondParams, build_precond_2d, build_precond_3d
from .problems import ProblemSpec, catalog, get_problem
from .routes import solve_equation, solve_problem
from .sylvester_direct import bartels_stewart
from .sylvester_kpik import KpikConfig, kpik_solve

__version__ = "0.1.0"

__all__ = [
    "CsrMatrix",
    "Dirichlet",
    "Grid",
    "KpikConfig",
    "KrylovConfig",
    "LinearOperator",
    "LowRankFactor",
    "MultitermEquation",
    "PrecondParams",
    "ProblemSpec",
    "SeparableWind",
    "SolveReport",
    "assemble_2d",
    "assemble_3d",
    "assemble_3d_zsplit",
    "bartels_stewart",
    "build_precond_2d",
    "build_precond_3d",
    "catalog",
    "fgmres",
    "get_problem",
    "gmres",
    "kpik_solve",
    "kron_expand",
    "mesh_peclet",
    "solve_equation",
    "solve_problem",
]
