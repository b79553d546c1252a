"""Subspaces of a fiber, stored as a column basis."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..exceptions import DependentBasisError, DimensionMismatchError
from .norms import Fiber

RANK_TOL = 1e-9


def orthonormal_basis(B: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the column span of ``B``, which must be independent."""
    if B.shape[1] == 0:
        return B.copy()
    Q, _ = np.linalg.qr(B)
    return Q


def relative_volume(B: np.ndarray) -> float:
    """Euclidean volume of the normalized columns of ``B`` (1 for orthogonal, 0 for dependent)."""
    if B.shape[1] == 0:
        return 1.0
    norms = np.linalg.norm(B, axis=0)
    if np.any(norms == 0):
        return 0.0
    r = np.linalg.qr(B / norms, mode="r")
    return float(np.prod(np.abs(np.diag(r))))


def orthogonal_complement(Q: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the Euclidean complement of span(Q) in R^dim."""
    k = Q.shape[1]
    if k == 0:
        return np.eye(dim)
    if k == dim:
        return np.zeros((dim, 0))
    U, _, _ = np.linalg.svd(Q, full_matrices=True)
    return U[:, k:]


class Subspace:
    """A subspace of ``fiber`` spanned by the columns of ``basis``.

    Independence is checked on construction with the volume of the
    normalized columns in the Euclidean chart.
    """

    __slots__ = ("fiber", "_basis", "_q")

    def __init__(self, fiber: Fiber, basis, rank_tol: float = RANK_TOL, check: bool = True) -> None:
        B = np.asarray(basis, dtype=float)
        if B.ndim == 1:
            B = B.reshape(fiber.dim, -1) if B.size else np.zeros((fiber.dim, 0))
        if B.ndim != 2 or B.shape[0] != fiber.dim:
            raise DimensionMismatchError(
                f"basis must have shape ({fiber.dim}, k), got {B.shape}")
        if B.shape[1] > fiber.dim:
            raise DependentBasisError(f"{B.shape[1]} vectors cannot be independent in dimension {fiber.dim}")
        if not np.all(np.isfinite(B)):
            raise ValueError("basis contains non-finite entries")
        if check and B.shape[1] and relative_volume(B) <= rank_tol:
            raise DependentBasisError("basis vectors are linearly dependent")
        B = B.copy()
        B.setflags(write=False)
        self.fiber = fiber
        self._basis = B
        self._q = None

    @classmethod
    def span(cls, fiber: Fiber, vectors: Iterable, **kw) -> "Subspace":
        """Subspace spanned by a list of vectors."""
        vs = [np.asarray(v, dtype=float) for v in vectors]
        if not vs:
            return cls.zero(fiber)
        return cls(fiber, np.column_stack(vs), **kw)

    @classmethod
    def zero(cls, fiber: Fiber) -> "Subspace":
        return cls(fiber, np.zeros((fiber.dim, 0)))

    @classmethod
    def full(cls, fiber: Fiber) -> "Subspace":
        return cls(fiber, np.eye(fiber.dim))

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    @property
    def dim(self) -> int:
        return self._basis.shape[1]

    @property
    def vectors(self) -> list[np.ndarray]:
        return [self._basis[:, i].copy() for i in range(self.dim)]

    def orthonormal(self) -> np.ndarray:
        """Euclidean orthonormal basis of the same span."""
        if self._q is None:
            q = orthonormal_basis(self._basis)
            q.setflags(write=False)
            self._q = q
        return self._q

    def l2_projector(self) -> np.ndarray:
        Q = self.orthonormal()
        return Q @ Q.T

    def l2_complement(self) -> "Subspace":
        return Subspace(self.fiber, orthogonal_complement(self.orthonormal(), self.fiber.dim), check=False)

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim} in R^{self.fiber.dim}, norm={self.fiber.norm.kind})"

    def to_dict(self) -> dict:
        return {"fiber_dim": self.fiber.dim, "norm": self.fiber.norm.to_dict(),
                "basis": self._basis.T.tolist()}
