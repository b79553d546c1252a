"""Grassmannian distances, projections and bounded complements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import DependentBasisError, DimensionMismatchError
from ._search import maximize_on_spheres
from .distance import dist_to_matrix_span
from .norms import Estimate, L2, NormSpec, column_norms, fiber_norm, unit_ball_vertices
from .subspace import RANK_TOL, Subspace, orthogonal_complement, relative_volume


def _same_fiber(A: Subspace, B: Subspace) -> None:
    if A.fiber != B.fiber:
        raise DimensionMismatchError("subspaces live in different fibers")


def l2_delta(QA: np.ndarray, QB: np.ndarray) -> float:
    """Euclidean gap sup_{a in S_A} d(a, B) from orthonormal bases."""
    if QA.shape[1] == 0:
        return 0.0
    R = QA - QB @ (QB.T @ QA)
    return float(min(np.linalg.norm(R, 2), 1.0))


def l2_dist(QA: np.ndarray, QB: np.ndarray) -> float:
    """Euclidean Hausdorff distance between unit spheres, 2 sin(theta_max / 2)."""
    s = max(l2_delta(QA, QB), l2_delta(QB, QA))
    return 2.0 * math.sin(0.5 * math.asin(min(s, 1.0)))


def grassmann_delta(A: Subspace, B: Subspace, n_starts: int = 64) -> Estimate:
    """delta(A, B) = sup over unit a in A of d(a, B)."""
    _same_fiber(A, B)
    if A.dim == 0:
        raise ValueError("delta(A, B) needs a nonzero A")
    n = A.fiber.norm
    if B.dim == 0:
        return Estimate(1.0, True)
    if n.is_l2:
        return Estimate(l2_delta(A.orthonormal(), B.orthonormal()), True)
    BA = A.basis

    def objective(c: np.ndarray) -> float:
        a = BA @ c[:, 0]
        na = fiber_norm(a, n)
        if na <= 1e-300:
            return 0.0
        return dist_to_matrix_span(a / na, B.basis, n)

    if A.dim == 1:
        return Estimate(objective(np.ones((1, 1))), True)
    return Estimate(maximize_on_spheres(objective, L2, A.dim, 1, n_starts=n_starts), False)


def _dist_to_sphere(a: np.ndarray, B: np.ndarray, n: NormSpec, n_starts: int) -> float:
    """inf over unit b in span(B) of ||a - b||."""
    if B.shape[1] == 1:
        b = B[:, 0] / fiber_norm(B[:, 0], n)
        return min(fiber_norm(a - b, n), fiber_norm(a + b, n))

    def neg(c: np.ndarray) -> float:
        b = B @ c[:, 0]
        nb = fiber_norm(b, n)
        if nb <= 1e-300:
            return -np.inf
        return -fiber_norm(a - b / nb, n)

    c0, *_ = np.linalg.lstsq(B, a, rcond=None)
    return -maximize_on_spheres(neg, L2, B.shape[1], 1, n_starts=max(8, n_starts // 8),
                                extra_starts=[c0])


def grassmann_dist(A: Subspace, B: Subspace, n_starts: int = 64) -> Estimate:
    """Hausdorff distance between the unit spheres of A and B."""
    _same_fiber(A, B)
    if A.dim == 0 or B.dim == 0:
        raise ValueError("grassmann_dist needs nonzero subspaces")
    n = A.fiber.norm
    if n.is_l2:
        return Estimate(l2_dist(A.orthonormal(), B.orthonormal()), True)

    def one_side(X: Subspace, Y: Subspace) -> float:
        def objective(c: np.ndarray) -> float:
            x = X.basis @ c[:, 0]
            nx = fiber_norm(x, n)
            if nx <= 1e-300:
                return 0.0
            return _dist_to_sphere(x / nx, Y.basis, n, n_starts)
        return maximize_on_spheres(objective, L2, X.dim, 1, n_starts=n_starts)

    return Estimate(max(one_side(A, B), one_side(B, A)), False)


@dataclass(frozen=True, eq=False)
class Projector:
    """Projection onto ``range`` along ``kernel`` inside their common span."""

    range: Subspace
    kernel: Subspace
    matrix: np.ndarray

    def __call__(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)


def _joint_basis(range_: Subspace, kernel: Subspace, rank_tol: float) -> np.ndarray:
    _same_fiber(range_, kernel)
    M = np.hstack([range_.basis, kernel.basis])
    if M.shape[1] > range_.fiber.dim or relative_volume(M) <= rank_tol:
        raise DependentBasisError("range and kernel bases are not jointly independent")
    return M


def projector(range_: Subspace, kernel: Subspace, rank_tol: float = RANK_TOL) -> Projector:
    """The projection onto ``range_`` parallel to ``kernel``.

    Outside span(range + kernel) the matrix acts through the Euclidean
    orthogonal projection onto that span.
    """
    M = _joint_basis(range_, kernel, rank_tol)
    k = range_.dim
    coords = np.linalg.pinv(M)
    P = range_.basis @ coords[:k]
    return Projector(range_, kernel, P)


def projection_norm(range_: Subspace, kernel: Subspace, rank_tol: float = RANK_TOL,
                    n_starts: int = 64) -> Estimate:
    """Operator norm of the projection onto ``range_`` along ``kernel``, on their span."""
    M = _joint_basis(range_, kernel, rank_tol)
    k = range_.dim
    if k == 0:
        return Estimate(0.0, True)
    if kernel.dim == 0:
        return Estimate(1.0, True)
    n = range_.fiber.norm
    d = range_.fiber.dim
    if n.is_l2:
        # x = Q y has coordinates R^{-1} y in the joint basis; keep the range part
        _, R = np.linalg.qr(M)
        coords = np.linalg.solve(R, np.eye(R.shape[0]))[:k]
        return Estimate(float(np.linalg.norm(range_.basis @ coords, 2)), True)
    P = range_.basis @ np.linalg.pinv(M)[:k]
    if M.shape[1] == d:
        V = unit_ball_vertices(n, d)
        return Estimate(float(column_norms(P @ V, n).max()), True)

    def objective(c: np.ndarray) -> float:
        x = M @ c[:, 0]
        nx = fiber_norm(x, n)
        if nx <= 1e-300:
            return 0.0
        return fiber_norm(P @ x, n) / nx

    return Estimate(maximize_on_spheres(objective, L2, M.shape[1], 1, n_starts=n_starts), False)


def complement_bound(m: int) -> float:
    """Largest projection norm accepted for a complement of dimension m."""
    return math.sqrt(m) + 2.0


def bounded_complement(F: Subspace, ambient: Subspace, rank_tol: float = RANK_TOL,
                       rng: np.random.Generator | None = None, tries: int = 64) -> Subspace:
    """A complement H of F inside ``ambient`` with ||Pi_{H || F}|| <= sqrt(m) + 2.

    Without ``rng`` the Euclidean orthogonal complement is tried first. With
    ``rng`` random complements are drawn and the first one meeting the bound
    is returned; this is the second selection policy used for uniqueness
    checks.
    """
    _same_fiber(F, ambient)
    QA = ambient.orthonormal()
    if F.dim and l2_delta(F.orthonormal(), QA) >= max(rank_tol, 1e-9) * 10:
        raise ValueError("F is not contained in the ambient subspace")
    if F.dim > ambient.dim:
        raise ValueError("F has larger dimension than the ambient subspace")
    m = ambient.dim - F.dim
    fiber = F.fiber
    if m == 0:
        return Subspace.zero(fiber)
    G = QA.T @ F.orthonormal()
    H0 = QA @ orthogonal_complement(np.linalg.qr(G)[0] if G.shape[1] else G, ambient.dim)
    bound = complement_bound(m) + 1e-9
    if rng is None:
        H = Subspace(fiber, H0, check=False)
        if fiber.norm.is_l2 or F.dim == 0 or projection_norm(H, F).value <= bound:
            return H
        rng = np.random.default_rng(0)
    for _ in range(tries):
        shear = F.orthonormal() @ rng.uniform(-1.0, 1.0, size=(F.dim, m)) if F.dim else 0.0
        cand = H0 + shear
        try:
            H = Subspace(fiber, cand, rank_tol=rank_tol)
        except DependentBasisError:
            continue
        if F.dim == 0 or projection_norm(H, F).value <= bound:
            return H
    raise RuntimeError("no complement satisfying the projection bound was found")
