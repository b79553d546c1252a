"""QR sweeps along base orbits.

Two sweeps carry everything the splitting needs:

* the forward sweep pushes a generic frame from far in the past and
  re-orthonormalizes at every step; its leading columns span the sums of the
  fastest Oseledets spaces (the forward flag);
* the adjoint sweep pulls a generic frame back from far in the future
  through the transposed matrices; the orthogonal complement of its leading
  columns is the slow space of the corresponding level.

The fast space of a level is the intersection of the flag with the slow
space of the same level. ``OrbitFrames`` evaluates both sweeps once over a
window of times and serves bases at every point of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import BasePoint, shift
from .cocycle import LinearCocycle
from .geometry import Subspace
from .geometry.subspace import orthogonal_complement

_FRAME_SEED = 0x5EED_F2A3


def generic_frame(d: int, r: int) -> np.ndarray:
    """A fixed, generic orthonormal d x r frame."""
    rng = np.random.default_rng([_FRAME_SEED, d, r])
    return np.linalg.qr(rng.standard_normal((d, r)))[0]


def _qr_pos(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Q, R = np.linalg.qr(X)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, np.abs(np.diag(R))


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


@dataclass
class Sweep:
    """Frames and log stretch factors of one sweep.

    ``frames[t]`` is the frame at offset ``t`` from the anchor point and
    ``logr[t]`` the log of the R diagonal produced when the frame at ``t``
    was formed.
    """

    frames: dict[int, np.ndarray]
    logr: dict[int, np.ndarray]

    def log_growth(self, times) -> np.ndarray:
        return np.sum([self.logr[t] for t in times], axis=0)


def forward_sweep(c: LinearCocycle, p: BasePoint, t0: int, t1: int, r: int,
                  keep_from: int | None = None, X0: np.ndarray | None = None) -> Sweep:
    """Push a frame from offset t0 to t1 (t0 <= t1), keeping frames at offsets >= keep_from."""
    keep_from = t0 if keep_from is None else keep_from
    X = generic_frame(c.dim(shift(p, t0)), r) if X0 is None else X0
    frames, logr = {}, {}
    if t0 >= keep_from:
        frames[t0] = X
    for t in range(t0, t1):
        X, d = _qr_pos(c.matrix(shift(p, t)) @ X)
        if t + 1 >= keep_from:
            frames[t + 1] = X
            logr[t + 1] = _log(d)
    return Sweep(frames, logr)


def adjoint_sweep(c: LinearCocycle, p: BasePoint, t1: int, t0: int, r: int,
                  keep_until: int | None = None) -> Sweep:
    """Pull a frame back through transposes from offset t1 down to t0, keeping offsets <= keep_until."""
    keep_until = t1 if keep_until is None else keep_until
    X = generic_frame(c.dim(shift(p, t1)), r)
    frames, logr = {}, {}
    if t1 <= keep_until:
        frames[t1] = X
    for t in range(t1 - 1, t0 - 1, -1):
        X, d = _qr_pos(c.matrix(shift(p, t)).T @ X)
        if t <= keep_until:
            frames[t] = X
            logr[t] = _log(d)
    return Sweep(frames, logr)


def slow_basis(G: np.ndarray, m: int, d: int) -> np.ndarray:
    """Orthonormal basis of the complement of the first m adjoint columns."""
    return orthogonal_complement(G[:, :m], d) if m else np.eye(d)


def intersect_flag(Qf: np.ndarray, G: np.ndarray, m_lo: int) -> np.ndarray:
    """Orthonormal basis of span(Qf) intersected with the complement of G[:, :m_lo]."""
    if m_lo == 0:
        return Qf
    M = G[:, :m_lo].T @ Qf
    _, _, vt = np.linalg.svd(M)
    N = vt[m_lo:].T
    return np.linalg.qr(Qf @ N)[0]


def burn_in_for(gap: float, floor: int = 20, cap: int = 2000) -> int:
    """Steps after which a generic frame aligns to double precision across ``gap``."""
    if not np.isfinite(gap) or gap <= 0:
        return cap
    return int(min(cap, max(floor, math.ceil(40.0 / gap))))


class OrbitFrames:
    """Fast spaces, flags and slow spaces at every offset of a window.

    Args:
        c: The linear cocycle.
        p: Anchor base point; offsets are relative to it.
        mtilde: Cumulative multiplicities m~_1 < m~_2 < ... of the levels used.
        t0, t1: Window of offsets (inclusive).
        burn_in: Extra steps before t0 (forward) and after t1 (adjoint).
    """

    def __init__(self, c: LinearCocycle, p: BasePoint, mtilde: list[int],
                 t0: int, t1: int, burn_in: int) -> None:
        if t0 > t1:
            raise ValueError("empty window")
        self.c = c
        self.p = p
        self.mtilde = [int(m) for m in mtilde]
        self.t0, self.t1 = int(t0), int(t1)
        self.burn_in = int(burn_in)
        r = self.mtilde[-1] if self.mtilde else 0
        self.r = r
        if r:
            self.fwd = forward_sweep(c, p, t0 - burn_in, t1, r, keep_from=t0)
            self.adj = adjoint_sweep(c, p, t1 + burn_in, t0, r, keep_until=t1)
        else:
            self.fwd = self.adj = None

    def dim(self, t: int) -> int:
        return self.c.dim(shift(self.p, t))

    def fiber(self, t: int):
        return self.c.fiber(shift(self.p, t))

    def flag(self, t: int, m: int) -> np.ndarray:
        """Orthonormal basis of the sum of the fast spaces whose total dimension is m."""
        return self.fwd.frames[t][:, :m] if m else np.zeros((self.dim(t), 0))

    def slow(self, t: int, m: int) -> np.ndarray:
        """Orthonormal basis of the slow space of codimension m."""
        if m == 0:
            return np.eye(self.dim(t))
        return slow_basis(self.adj.frames[t], m, self.dim(t))

    def fast(self, t: int, level: int) -> np.ndarray:
        """Orthonormal basis of the fast space of ``level`` (1-based)."""
        lo = self.mtilde[level - 2] if level >= 2 else 0
        hi = self.mtilde[level - 1]
        return intersect_flag(self.flag(t, hi), self.adj.frames[t], lo)

    def fast_subspace(self, t: int, level: int) -> Subspace:
        return Subspace(self.fiber(t), self.fast(t, level), check=False)

    def slow_subspace(self, t: int, m: int) -> Subspace:
        return Subspace(self.fiber(t), self.slow(t, m), check=False)

    def restricted(self, t: int, B_t: np.ndarray, B_next: np.ndarray) -> np.ndarray:
        """Coordinates of psi at offset t between orthonormal bases of invariant subspaces."""
        return B_next.T @ (self.c.matrix(shift(self.p, t)) @ B_t)
