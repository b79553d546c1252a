"""Geometry of finite-dimensional normed fibers."""

from .distance import dist_to_span, volume
from .grassmann import (
    Projector,
    bounded_complement,
    complement_bound,
    grassmann_delta,
    grassmann_dist,
    projection_norm,
    projector,
)
from .growth import compound, dk_of_map, dual_dk
from .norms import Estimate, Fiber, L2, NormSpec, dual_norm, fiber_norm
from .subspace import RANK_TOL, Subspace

__all__ = [
    "Estimate",
    "Fiber",
    "L2",
    "NormSpec",
    "Projector",
    "RANK_TOL",
    "Subspace",
    "bounded_complement",
    "complement_bound",
    "compound",
    "dist_to_span",
    "dk_of_map",
    "dual_dk",
    "dual_norm",
    "fiber_norm",
    "grassmann_delta",
    "grassmann_dist",
    "projection_norm",
    "projector",
    "volume",
]
