"""Multi-start local maximization used for non-Euclidean suprema."""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .norms import NormSpec, unit_ball_vertices

_SEARCH_SEED = 20240917


def _starts(n_in: NormSpec, dim: int, k: int, n_starts: int, rng: np.random.Generator) -> list[np.ndarray]:
    starts: list[np.ndarray] = []
    verts = unit_ball_vertices(n_in, dim) if dim <= 12 else None
    if verts is None:
        verts = np.eye(dim)
    cols = [verts[:, i] for i in range(verts.shape[1])]
    if k == 1:
        starts.extend(c[:, None] for c in cols)
    else:
        combos = itertools.combinations(range(len(cols)), k)
        for idx in itertools.islice(combos, 4 * n_starts):
            starts.append(np.column_stack([cols[i] for i in idx]))
    while len(starts) < len(cols) * (k == 1) + n_starts:
        starts.append(rng.standard_normal((dim, k)))
    return starts


def maximize_on_spheres(
    objective: Callable[[np.ndarray], float],
    n_in: NormSpec,
    dim: int,
    k: int,
    n_starts: int = 64,
    n_refine: int = 4,
    extra_starts: list[np.ndarray] | None = None,
) -> float:
    """Largest value of a scale-invariant ``objective(Y)`` over (dim x k) matrices Y.

    The objective must be invariant under rescaling each column, so that the
    maximization over products of unit spheres becomes unconstrained. Starts
    are the vertices of the unit ball (combined k at a time), any extra
    starts, and Gaussian samples; the best few are refined by Nelder-Mead.
    The result is a lower bound for the true supremum.
    """
    rng = np.random.default_rng(_SEARCH_SEED)
    starts = _starts(n_in, dim, k, n_starts, rng)
    if extra_starts:
        starts.extend(np.asarray(s, dtype=float).reshape(dim, k) for s in extra_starts)
    vals = np.array([objective(s) for s in starts])
    best = float(np.max(vals))
    order = np.argsort(-vals)[:n_refine]

    def neg(z: np.ndarray) -> float:
        v = objective(z.reshape(dim, k))
        return -v if np.isfinite(v) else 0.0

    for i in order:
        res = minimize(neg, starts[i].ravel(), method="Nelder-Mead",
                       options={"maxiter": 200 * dim * k, "xatol": 1e-10, "fatol": 1e-13})
        best = max(best, -float(res.fun))
    return best
