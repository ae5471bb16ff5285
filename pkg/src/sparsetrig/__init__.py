"""Dimensionally adaptive sparse trigonometric interpolation."""

from .adaptive import RefinementState, init_isotropic, refine_once, run
from .anisotropy import estimate as estimate_anisotropy
from .index_sets import LowerSet, hyperbolic_set, total_degree_set
from .models import parse_model
from .sparse_grid import ModelOracle, OracleError, SparseGrid, build_grid, optimal_tensors, refine_grid

__version__ = "0.1.0"

__all__ = [
    "LowerSet", "ModelOracle", "OracleError", "RefinementState", "SparseGrid",
    "build_grid", "estimate_anisotropy", "hyperbolic_set", "init_isotropic",
    "optimal_tensors", "parse_model", "refine_grid", "refine_once", "run",
    "total_degree_set",
]
