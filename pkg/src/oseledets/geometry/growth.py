"""The growth functional D_k and compound matrices."""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .._validation import as_matrix, check_count
from ._search import maximize_on_spheres
from .distance import volume_of_columns
from .norms import Estimate, NormSpec, column_norms, dual_norm, unit_ball_vertices


@lru_cache(maxsize=256)
def _index_sets(n: int, k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.intp).reshape(-1, k)


def compound(A: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: all k x k minors in lexicographic index order.

    By Cauchy-Binet the compound of a product is the product of compounds,
    and the largest singular value of the compound is the product of the
    k largest singular values of ``A``.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if k == 1:
        return A.copy()
    rows = _index_sets(m, k)
    cols = _index_sets(n, k)
    if rows.shape[0] == 0 or cols.shape[0] == 0:
        return np.zeros((rows.shape[0], cols.shape[0]))
    sub = A[rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(sub)


def _dk_l2(A: np.ndarray, k: int) -> float:
    s = np.linalg.svd(A, compute_uv=False)
    if s.shape[0] < k:
        return 0.0
    return float(np.prod(s[:k]))


def dk_of_map(A, n_in: NormSpec, n_out: NormSpec, k: int, n_starts: int = 64) -> Estimate:
    """D_k(A): supremum of Vol(A x_1, ..., A x_k) over unit vectors x_i.

    Exact when both norms are Euclidean (product of the top k singular
    values) and for k = 1 with a polyhedral input norm (vertex
    enumeration). Otherwise a multi-start lower bound flagged inexact.
    """
    A = as_matrix(A)
    k = check_count(k, "k", 1)
    d_out, d_in = A.shape
    if k > d_in:
        raise ValueError(f"k={k} exceeds the input dimension {d_in}")
    if not np.any(A):
        return Estimate(0.0, True)
    if n_in.is_l2 and n_out.is_l2:
        return Estimate(_dk_l2(A, k), True)
    if k > d_out:
        return Estimate(0.0, True)
    if k == 1 and n_in.polyhedral and d_in <= 20:
        V = unit_ball_vertices(n_in, d_in)
        return Estimate(float(column_norms(A @ V, n_out).max()), True)

    def objective(Y: np.ndarray) -> float:
        ny = column_norms(Y, n_in)
        if np.any(ny <= 1e-300):
            return 0.0
        return volume_of_columns(A @ (Y / ny), n_out)

    extra = []
    if n_in.is_l2 or n_out.is_l2:
        _, _, vt = np.linalg.svd(A)
        extra.append(vt[:k].T)
    val = maximize_on_spheres(objective, n_in, d_in, k, n_starts=n_starts, extra_starts=extra)
    return Estimate(val, False)


def dual_dk(A, n_in: NormSpec, n_out: NormSpec, k: int, n_starts: int = 64) -> Estimate:
    """D_k of the adjoint map A^T between the dual spaces."""
    A = as_matrix(A)
    k = check_count(k, "k", 1)
    if k > A.shape[1]:
        raise ValueError(f"k={k} exceeds the input dimension {A.shape[1]}")
    if k > A.shape[0]:
        return Estimate(0.0, True)
    return dk_of_map(A.T, dual_norm(n_out), dual_norm(n_in), k, n_starts=n_starts)
