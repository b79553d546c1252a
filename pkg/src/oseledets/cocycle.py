"""Linear and nonlinear cocycles over a base system.

A cocycle is given one step at a time: ``matrix_fn(p)`` maps the fiber at
``p`` to the fiber at ``theta(p)``. Long products are kept as a matrix
together with a separate log-scale so that exponents far from zero do not
overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable

import numpy as np

from ._validation import as_matrix, as_vector, check_count
from .base import BasePoint, shift
from .exceptions import DependentBasisError, DimensionMismatchError
from .geometry import L2, Fiber, NormSpec, Subspace
from .geometry.grassmann import l2_delta
from .geometry.subspace import RANK_TOL, relative_volume

__all__ = [
    "FieldSpec",
    "LinearCocycle",
    "NonlinearCocycle",
    "Nonlinearity",
    "CocycleProduct",
    "compose_forward",
    "compose_backward",
    "restricted_inverse",
    "restricted_map",
    "perron_residual",
]

_RESCALE_HI = 1e150
_RESCALE_LO = 1e-150


@dataclass(frozen=True)
class FieldSpec:
    """Dimension and norm of the fiber over each base point."""

    dim_fn: Callable[[BasePoint], int]
    norm_fn: Callable[[BasePoint], NormSpec] = field(default=lambda p: L2)

    @classmethod
    def constant(cls, dim: int, norm: NormSpec = L2) -> "FieldSpec":
        dim = int(dim)
        return cls(lambda p: dim, lambda p: norm)

    def dim(self, p: BasePoint) -> int:
        return int(self.dim_fn(p))

    def fiber(self, p: BasePoint) -> Fiber:
        return Fiber(self.dim(p), self.norm_fn(p))


class LinearCocycle:
    """psi_p : E_p -> E_{theta p}, one matrix per base point.

    ``matrix_fn`` must be a pure function of the base point; its values are
    memoized. ``meta`` carries descriptive information such as known
    exponents of a builtin.
    """

    def __init__(self, field: FieldSpec, matrix_fn: Callable[[BasePoint], Any],
                 meta: dict | None = None, cache_size: int = 1 << 15) -> None:
        self.field = field
        self.matrix_fn = matrix_fn
        self.meta = dict(meta or {})
        self._cached = lru_cache(maxsize=cache_size)(self._checked)

    def _checked(self, p: BasePoint) -> np.ndarray:
        A = as_matrix(self.matrix_fn(p), (self.field.dim(shift(p, 1)), self.field.dim(p)))
        A.setflags(write=False)
        return A

    def matrix(self, p: BasePoint) -> np.ndarray:
        return self._cached(p)

    def fiber(self, p: BasePoint) -> Fiber:
        return self.field.fiber(p)

    def dim(self, p: BasePoint) -> int:
        return self.field.dim(p)

    def scaled(self, c: float) -> "LinearCocycle":
        """The cocycle c * psi."""
        c = float(c)
        return LinearCocycle(self.field, lambda p: c * self.matrix(p), self.meta)

    def __call__(self, p: BasePoint, x) -> np.ndarray:
        return self.matrix(p) @ as_vector(x, self.dim(p))


@dataclass(frozen=True)
class Nonlinearity:
    """Data of the Lipschitz-type bound on the nonlinear remainder.

    ``||P(xi) - P(eta)|| <= ||xi - eta|| f(p) h(||xi|| + ||eta||)`` for
    ``||xi||, ||eta|| <= rho(p)``, with ``h(x) = x**r * g(x)``.
    """

    r: float
    g: Callable[[float], float]
    f_fn: Callable[[BasePoint], float]
    rho_fn: Callable[[BasePoint], float]

    def h(self, x: float) -> float:
        return float(x) ** self.r * self.g(float(x))


class NonlinearCocycle:
    """phi_p : E_p -> E_{theta p} with a stationary solution Y."""

    def __init__(self, field: FieldSpec, map_fn: Callable, derivative_fn: Callable,
                 stationary_fn: Callable[[BasePoint], Any], nonlinearity: Nonlinearity,
                 meta: dict | None = None) -> None:
        self.field = field
        self.map_fn = map_fn
        self.derivative_fn = derivative_fn
        self.stationary_fn = stationary_fn
        self.nonlinearity = nonlinearity
        self.meta = dict(meta or {})
        self._linear: LinearCocycle | None = None

    def fiber(self, p: BasePoint) -> Fiber:
        return self.field.fiber(p)

    def dim(self, p: BasePoint) -> int:
        return self.field.dim(p)

    def stationary(self, p: BasePoint) -> np.ndarray:
        return as_vector(self.stationary_fn(p), self.dim(p), "Y")

    def __call__(self, p: BasePoint, x) -> np.ndarray:
        out = np.asarray(self.map_fn(p, as_vector(x, self.dim(p))), dtype=float)
        if out.shape != (self.dim(shift(p, 1)),):
            raise DimensionMismatchError(f"map_fn returned shape {out.shape}")
        return out

    def iterate(self, p: BasePoint, x, n: int) -> np.ndarray:
        """phi^n_p(x)."""
        x = as_vector(x, self.dim(p))
        for t in range(check_count(n)):
            x = self(shift(p, t), x)
        return x

    def derivative(self, p: BasePoint, x) -> np.ndarray:
        return as_matrix(self.derivative_fn(p, as_vector(x, self.dim(p))),
                         (self.dim(shift(p, 1)), self.dim(p)))

    def linearization(self) -> LinearCocycle:
        """psi = D phi along the stationary solution."""
        if self._linear is None:
            self._linear = LinearCocycle(
                self.field, lambda p: self.derivative(p, self.stationary(p)),
                {k: v for k, v in self.meta.items() if k == "exponents"})
        return self._linear


@dataclass(frozen=True, eq=False)
class CocycleProduct:
    """A product of cocycle matrices, equal to ``matrix * exp(log_scale)``.

    ``start`` is the base point whose fiber is the domain.
    """

    start: BasePoint
    steps: int
    matrix: np.ndarray
    log_scale: float = 0.0

    @property
    def end(self) -> BasePoint:
        return shift(self.start, self.steps)

    def full(self) -> np.ndarray:
        """The unscaled product (may overflow for long products)."""
        return self.matrix * np.exp(self.log_scale)


def _rescale(M: np.ndarray, log_scale: float) -> tuple[np.ndarray, float]:
    s = float(np.max(np.abs(M), initial=0.0))
    if s == 0.0 or _RESCALE_LO <= s <= _RESCALE_HI:
        return M, log_scale
    return M / s, log_scale + float(np.log(s))


def compose_forward(c: LinearCocycle, p: BasePoint, n: int) -> CocycleProduct:
    """psi^n_p = psi_{theta^{n-1} p} ... psi_p."""
    n = check_count(n)
    M = np.eye(c.dim(p))
    ls = 0.0
    for t in range(n):
        M = c.matrix(shift(p, t)) @ M
        M, ls = _rescale(M, ls)
    return CocycleProduct(p, n, M, ls)


def compose_backward(c: LinearCocycle, p: BasePoint, n: int) -> CocycleProduct:
    """psi^n_{sigma^n p}: the product of n steps that ends in the fiber at p."""
    n = check_count(n)
    M = np.eye(c.dim(p))
    ls = 0.0
    for t in range(1, n + 1):
        M = M @ c.matrix(shift(p, -t))
        M, ls = _rescale(M, ls)
    return CocycleProduct(shift(p, -n), n, M, ls)


def restricted_map(prod: CocycleProduct, H_end: Subspace, H_start: Subspace,
                   rank_tol: float = RANK_TOL, match_tol: float = 1e-6) -> np.ndarray:
    """Coordinates (in the given bases) of the scaled product restricted to H_start.

    Returns C with ``prod.matrix @ H_start.basis = H_end.basis @ C``; the true
    restriction is ``C * exp(prod.log_scale)``.
    """
    if H_start.dim != H_end.dim:
        raise DimensionMismatchError("start and end subspaces differ in dimension")
    if prod.matrix.shape[1] != H_start.fiber.dim or prod.matrix.shape[0] != H_end.fiber.dim:
        raise DimensionMismatchError("product does not map between the given fibers")
    if H_start.dim == 0:
        return np.zeros((0, 0))
    img = prod.matrix @ H_start.basis
    if relative_volume(img) <= rank_tol:
        raise DependentBasisError("restriction of the product is not injective")
    Qimg = np.linalg.qr(img)[0]
    if l2_delta(Qimg, H_end.orthonormal()) >= match_tol:
        raise ValueError("image of H_start does not match H_end")
    C, *_ = np.linalg.lstsq(H_end.basis, img, rcond=None)
    return C


def restricted_inverse(prod: CocycleProduct, H_end: Subspace, H_start: Subspace,
                       rank_tol: float = RANK_TOL) -> np.ndarray:
    """Inverse of the product restricted to H_start, as a matrix from H_end- to H_start-coordinates."""
    C = restricted_map(prod, H_end, H_start, rank_tol)
    return np.linalg.inv(C) * np.exp(-prod.log_scale)


def perron_residual(nc: NonlinearCocycle, p: BasePoint, xi) -> np.ndarray:
    """P_p(xi) = phi_p(Y_p + xi) - phi_p(Y_p) - psi_p(xi)."""
    xi = as_vector(xi, nc.dim(p), "xi")
    Y = nc.stationary(p)
    psi = nc.linearization().matrix(p)
    return nc(p, Y + xi) - nc(p, Y) - psi @ xi
