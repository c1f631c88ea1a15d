"""Adaptive first-order system least-squares FEM for convection-diffusion-reaction."""
from .adapt import RunConfig, RunRecord, adaptive_solve, mark_maximum
from .assembly import Formulation, assemble, build_spaces
from .estimate import error_norms, local_indicators
from .mesh import build_initial_mesh, classify_boundary, classify_elements, refine
from .problems import boundary_layer_problem, get_problem, interior_layer_problem, \
    manufactured_problem

__all__ = ["RunConfig", "RunRecord", "adaptive_solve", "mark_maximum", "Formulation",
           "assemble", "build_spaces", "error_norms", "local_indicators",
           "build_initial_mesh", "classify_boundary", "classify_elements", "refine",
           "boundary_layer_problem", "get_problem", "interior_layer_problem",
           "manufactured_problem"]
