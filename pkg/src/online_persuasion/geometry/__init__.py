"""Polytopes, certified LP solving, projections, hulls and preimages."""
from .ellipsoid import EllipsoidResult, ellipsoid_iterations, ellipsoid_minimize
from .hull import (ConvexCombination, ImageHull, affine_frame, caratheodory_decompose,
                   image_hull, linear_preimage)
from .lp import LpSolution, solve_lp, solve_qp
from .polytope import Polytope
from .projection import project_euclidean, project_halfspaces

__all__ = [
    "ConvexCombination", "EllipsoidResult", "ImageHull", "LpSolution", "Polytope",
    "affine_frame", "caratheodory_decompose", "ellipsoid_iterations", "ellipsoid_minimize",
    "image_hull", "linear_preimage", "project_euclidean", "project_halfspaces",
    "solve_lp", "solve_qp",
]
