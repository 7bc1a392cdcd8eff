"""P1 finite elements on structured 1D/2D meshes."""

from .cg import SparseSystem, conjugate_gradient
from .mesh import Mesh
from .solve import (
    FemSolution,
    element_coefficient,
    flux_load,
    load_vector,
    solve_cell_problem,
    solve_dirichlet,
    solve_spd,
    stiffness,
)

__all__ = [
    "FemSolution",
    "Mesh",
    "SparseSystem",
    "conjugate_gradient",
    "element_coefficient",
    "flux_load",
    "load_vector",
    "solve_cell_problem",
    "solve_dirichlet",
    "solve_spd",
    "stiffness",
]
