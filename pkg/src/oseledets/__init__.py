"""Lyapunov spectra, Oseledets splittings and local invariant manifolds of cocycles."""

__version__ = "0.1.0"

from .base import BasePoint, BaseSystem, shift, sigma, theta
from .builtins import builtin
from .cocycle import FieldSpec, LinearCocycle, NonlinearCocycle, Nonlinearity
from .estimators import LyapunovSpectrumEstimator, OseledetsSplitting, StableManifold, UnstableManifold
from .exceptions import (BoundViolation, ConfigError, DependentBasisError, DimensionMismatchError,
                         NonHyperbolicError, OseledetsError, UnconvergedError, UnresolvedLevelError)
from .geometry import L2, Fiber, NormSpec, Subspace
from .manifolds import perron_context, solve_stable, solve_unstable, stable_chart, unstable_chart
from .spectrum import LyapunovSpectrum, estimate_spectrum
from .splitting import Splitting, fast_space, oseledets_splitting
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = [
    "BasePoint", "BaseSystem", "BoundViolation", "ConfigError", "DEFAULT_TOLERANCES",
    "DependentBasisError", "DimensionMismatchError", "Fiber", "FieldSpec", "L2",
    "LinearCocycle", "LyapunovSpectrum", "LyapunovSpectrumEstimator", "NonHyperbolicError",
    "NonlinearCocycle", "Nonlinearity", "NormSpec", "OseledetsError", "OseledetsSplitting",
    "Splitting", "StableManifold", "Subspace", "ToleranceConfig", "UnconvergedError",
    "UnresolvedLevelError", "UnstableManifold", "builtin", "estimate_spectrum", "fast_space",
    "oseledets_splitting", "perron_context", "shift", "sigma", "solve_stable", "solve_unstable",
    "stable_chart", "theta", "unstable_chart",
]
