"""scikit-learn style front ends.

``fit`` takes a cocycle and a base point; fitted attributes end with an
underscore. The splitting and manifold estimators additionally map vectors
of the base fiber: ``OseledetsSplitting.transform`` returns coordinates
adapted to the splitting and ``StableManifold.transform`` maps parameters
to chart points.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .base import BasePoint
from .cocycle import LinearCocycle, NonlinearCocycle
from .manifolds import perron_context, solve_stable, solve_unstable
from .spectrum import estimate_spectrum, growth_series_all, estimate_exponents
from .splitting import oseledets_splitting
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = ["LyapunovSpectrumEstimator", "OseledetsSplitting", "StableManifold", "UnstableManifold"]


def _tolerances(overrides) -> ToleranceConfig:
    if overrides is None:
        return DEFAULT_TOLERANCES
    if isinstance(overrides, ToleranceConfig):
        return overrides
    return DEFAULT_TOLERANCES.with_overrides(dict(overrides))


def _check_point(p) -> BasePoint:
    if not isinstance(p, BasePoint):
        raise TypeError("base_point must be a BasePoint")
    return p


class LyapunovSpectrumEstimator(BaseEstimator):
    """Volume-growth estimate of the Lyapunov spectrum at one base point."""

    def __init__(self, n_max=2000, k_max=None, direction="forward", tolerances=None):
        self.n_max = n_max
        self.k_max = k_max
        self.direction = direction
        self.tolerances = tolerances

    def fit(self, cocycle: LinearCocycle, base_point: BasePoint):
        p = _check_point(base_point)
        tol = _tolerances(self.tolerances)
        k_max = self.k_max if self.k_max is not None else cocycle.dim(p)
        self.series_ = growth_series_all(cocycle, p, k_max, self.n_max, self.direction)
        self.spectrum_ = estimate_exponents(self.series_, tol)
        self.Lambda_ = np.array(self.spectrum_.Lambda)
        self.mu_ = np.array(self.spectrum_.mu)
        self.mult_ = np.array(self.spectrum_.mult)
        self.status_ = self.spectrum_.status
        return self

    def predict(self, k):
        """Lambda_k for the requested k (1-based)."""
        check_is_fitted(self, "Lambda_")
        k = np.asarray(k, dtype=int)
        return self.Lambda_[k - 1]


class OseledetsSplitting(TransformerMixin, BaseEstimator):
    """Fast spaces H^1..H^levels and the slow tail at one base point."""

    def __init__(self, levels=None, n_spectrum=2000, check_unique=True, tolerances=None):
        self.levels = levels
        self.n_spectrum = n_spectrum
        self.check_unique = check_unique
        self.tolerances = tolerances

    def fit(self, cocycle: LinearCocycle, base_point: BasePoint, spectrum=None):
        p = _check_point(base_point)
        tol = _tolerances(self.tolerances)
        spec = spectrum if spectrum is not None else estimate_spectrum(
            cocycle, p, self.n_spectrum, tolerances=tol)
        levels = self.levels
        if levels is None:
            levels = sum(1 for i in range(1, spec.n_levels) if spec.resolved(i, tol.group_gap))
        self.splitting_ = oseledets_splitting(cocycle, p, spec, levels, tol, self.check_unique)
        self.spectrum_ = spec
        blocks = [h.basis for h in self.splitting_.fast] + [self.splitting_.slow_tail.basis]
        self.basis_ = np.hstack(blocks)
        self.block_sizes_ = np.array([b.shape[1] for b in blocks])
        self._inverse = np.linalg.inv(self.basis_)
        return self

    def transform(self, X):
        """Coordinates of the rows of X in the adapted basis."""
        if not hasattr(self, "basis_"):
            raise NotFittedError("OseledetsSplitting is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self._inverse.T

    def inverse_transform(self, C):
        check_is_fitted(self, "basis_")
        C = np.atleast_2d(np.asarray(C, dtype=float))
        return C @ self.basis_.T

    def components(self, X):
        """Split each row of X into its components along the fast spaces and the slow tail."""
        C = self.transform(X)
        out, start = [], 0
        for size in self.block_sizes_:
            out.append(C[:, start:start + size] @ self.basis_[:, start:start + size].T)
            start += size
        return out


class _Manifold(TransformerMixin, BaseEstimator):
    _kind = "stable"

    def __init__(self, upsilon=0.3, horizon=40, n_spectrum=2000, tolerances=None):
        self.upsilon = upsilon
        self.horizon = horizon
        self.n_spectrum = n_spectrum
        self.tolerances = tolerances

    def fit(self, cocycle: NonlinearCocycle, base_point: BasePoint, spectrum=None):
        p = _check_point(base_point)
        ctx = perron_context(cocycle, p, self._kind, self.upsilon, self.horizon, spectrum,
                             _tolerances(self.tolerances), self.n_spectrum)
        self.context_ = ctx
        self.h1_, self.h2_ = ctx.h1, ctx.h2
        self.radius_ = ctx.R
        self.rho_tilde_ = ctx.rho_tilde
        self.tangent_basis_ = ctx.param_basis
        return self

    def transform(self, X):
        """Chart points for parameters given as rows (fiber vectors or parameter coordinates)."""
        check_is_fitted(self, "context_")
        ctx = self.context_
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] == ctx.param_dim and X.shape[1] != ctx.S[0].shape[0]:
            X = X @ ctx.param_basis.T
        solve = solve_stable if self._kind == "stable" else solve_unstable
        Y = ctx.stationary(0)
        return np.array([Y + solve(ctx, v).point_offset for v in X])


class StableManifold(_Manifold):
    """Local stable manifold of the stationary solution at one base point."""

    _kind = "stable"


class UnstableManifold(_Manifold):
    """Local unstable manifold of the stationary solution at one base point."""

    _kind = "unstable"
