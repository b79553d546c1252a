"""Distances to subspaces and the volume functional."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .._validation import as_vector
from ..exceptions import DimensionMismatchError
from .norms import Fiber, NormSpec, fiber_norm
from .subspace import Subspace

_log = logging.getLogger(__name__)

LP_GAP_TOL = 1e-10


def _sup_weights(n: NormSpec, d: int) -> np.ndarray:
    return np.ones(d) if n.kind == "Linf" else np.asarray(n.weights, dtype=float)


def _dist_1d(x: np.ndarray, b: np.ndarray, n: NormSpec) -> float:
    """Exact min_t ||x - t b|| for polyhedral norms by breakpoint enumeration."""
    nz = b != 0
    if not np.any(nz):
        return fiber_norm(x, n)
    if n.kind == "L1":
        # weighted median of x_i / b_i with weights |b_i|
        r = x[nz] / b[nz]
        w = np.abs(b[nz])
        order = np.argsort(r)
        cw = np.cumsum(w[order])
        t = r[order][np.searchsorted(cw, 0.5 * cw[-1])]
        return float(np.abs(x - t * b).sum())
    w = _sup_weights(n, x.shape[0])
    # lines w_i (x_i - t b_i) and their negatives; the optimum of the upper
    # envelope sits where two lines with opposite slopes cross
    a = np.concatenate([w * x, -w * x])
    s = np.concatenate([-w * b, w * b])
    ds = s[:, None] - s[None, :]
    da = a[None, :] - a[:, None]
    mask = np.abs(ds) > 0
    with np.errstate(over="ignore"):
        t = np.concatenate([[0.0], x[nz] / b[nz], da[mask] / ds[mask]])
    # crossings of nearly parallel lines can overflow; drop them
    t = t[np.isfinite(t)]
    vals = np.max(np.abs(w[:, None] * (x[:, None] - b[:, None] * t[None, :])), axis=0)
    return float(vals.min())


def _dist_lp(x: np.ndarray, B: np.ndarray, n: NormSpec) -> float:
    d, k = B.shape
    if n.kind == "L1":
        c = np.concatenate([np.zeros(k), np.ones(d)])
        A = np.block([[-B, -np.eye(d)], [B, -np.eye(d)]])
    else:
        w = _sup_weights(n, d)
        WB = w[:, None] * B
        c = np.concatenate([np.zeros(k), [1.0]])
        A = np.block([[-WB, -np.ones((d, 1))], [WB, -np.ones((d, 1))]])
        x = w * x
    b = np.concatenate([-x, x])
    res = linprog(c, A_ub=A, b_ub=b, bounds=(None, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"distance LP failed: {res.message}")
    dual = float(b @ res.ineqlin.marginals)
    gap = abs(res.fun - dual)
    if gap > LP_GAP_TOL * max(1.0, abs(res.fun)):
        _log.warning("distance LP duality gap %.3e above %.0e", gap, LP_GAP_TOL)
    return max(float(res.fun), 0.0)


def dist_to_matrix_span(x: np.ndarray, B: np.ndarray, n: NormSpec) -> float:
    """inf_c ||x - B c|| in norm ``n`` for a column matrix ``B``."""
    if B.shape[1] == 0:
        return fiber_norm(x, n)
    if n.kind == "L2":
        c, *_ = np.linalg.lstsq(B, x, rcond=None)
        return float(np.linalg.norm(x - B @ c))
    if B.shape[1] == 1:
        return _dist_1d(x, B[:, 0], n)
    return _dist_lp(x, B, n)


def dist_to_span(x, s: Subspace) -> float:
    """Distance from ``x`` to the subspace ``s`` in the fiber norm (the quotient norm of [x])."""
    x = as_vector(x, s.fiber.dim)
    if s.fiber.norm.kind == "L2":
        if s.dim == 0:
            return float(np.linalg.norm(x))
        Q = s.orthonormal()
        return float(np.linalg.norm(x - Q @ (Q.T @ x)))
    return dist_to_matrix_span(x, s.basis, s.fiber.norm)


def volume_of_columns(X: np.ndarray, n: NormSpec) -> float:
    """Vol of the columns of ``X``: first norm times successive distances."""
    d, k = X.shape
    if k == 0:
        return 1.0
    if n.kind == "L2":
        if k > d:
            return 0.0
        r = np.linalg.qr(X, mode="r")
        return float(np.prod(np.abs(np.diag(r))))
    out = fiber_norm(X[:, 0], n)
    for i in range(1, k):
        if out == 0.0:
            return 0.0
        out *= dist_to_matrix_span(X[:, i], X[:, :i], n)
    return float(out)


def volume(vs: Sequence, f: Fiber) -> float:
    """Vol(x_1, ..., x_k) = ||x_1|| * prod_i d(x_i, span(x_1..x_{i-1})) in the fiber norm."""
    vs = [as_vector(v) for v in vs]
    for v in vs:
        if v.shape[0] != f.dim:
            raise DimensionMismatchError(f"vector of length {v.shape[0]} in fiber of dimension {f.dim}")
    if not vs:
        return 1.0
    return volume_of_columns(np.column_stack(vs), f.norm)
