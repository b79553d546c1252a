"""Lyapunov spectra from volume growth, slow spaces and temperedness checks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._validation import as_vector, check_count
from .base import BasePoint, shift
from .cocycle import FieldSpec, LinearCocycle
from .exceptions import UnresolvedLevelError
from .geometry import Subspace, compound, fiber_norm
from .orbit import adjoint_sweep, burn_in_for, slow_basis
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = [
    "GrowthSeries",
    "LyapunovSpectrum",
    "growth_series",
    "growth_series_all",
    "estimate_exponents",
    "estimate_spectrum",
    "slow_space",
    "vector_growth_rate",
    "temperedness_check",
    "TemperednessReport",
    "restricted_cocycle",
]

_log = logging.getLogger(__name__)

_RESCALE_HI = 1e150
_RESCALE_LO = 1e-150


@dataclass(frozen=True, eq=False)
class GrowthSeries:
    """Values (1/n) log D_k of the n-step product at the recorded n."""

    k: int
    direction: str
    n: np.ndarray
    values: np.ndarray

    def to_dict(self) -> dict:
        return {"k": self.k, "direction": self.direction, "n": self.n.tolist(),
                "values": [_json_float(v) for v in self.values]}


def _json_float(v: float):
    v = float(v)
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return v


def _record_grid(n_max: int, record: Sequence[int] | None) -> set[int]:
    if record is not None:
        grid = {int(n) for n in record if 1 <= int(n) <= n_max}
    else:
        step = max(1, n_max // 512)
        grid = set(range(step, n_max + 1, step))
    grid.add(n_max)
    return grid


def _default_k_max(c: LinearCocycle, p: BasePoint, n_max: int, direction: str) -> int:
    sign = 1 if direction == "forward" else -1
    return min(c.dim(shift(p, sign * t)) for t in range(0, min(n_max, 64) + 1))


def growth_series_all(c: LinearCocycle, p: BasePoint, k_max: int, n_max: int,
                      direction: str = "forward", record: Sequence[int] | None = None
                      ) -> list[GrowthSeries]:
    """Growth series for k = 1..k_max in one pass along the orbit.

    The n-step product is accumulated through its k-th compound matrix, whose
    largest singular value is D_k of the product in the Euclidean norm
    (Cauchy-Binet). Forward series start at p; backward series are the
    products psi^n_{sigma^n p}, which end in the fiber at p.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    k_max = check_count(k_max, "k_max", 1)
    n_max = check_count(n_max, "n_max", 1)
    grid = _record_grid(n_max, record)
    d0 = c.dim(p)
    if k_max > d0:
        raise ValueError(f"k={k_max} exceeds the fiber dimension {d0}")
    mats = [np.eye(compound(np.eye(d0), k).shape[0]) for k in range(1, k_max + 1)]
    scales = [0.0] * k_max
    dead = [False] * k_max
    ns, vals = [], [[] for _ in range(k_max)]
    for n in range(1, n_max + 1):
        q = shift(p, n - 1) if direction == "forward" else shift(p, -n)
        A = c.matrix(q)
        if k_max > min(A.shape):
            raise ValueError(f"k={k_max} exceeds the fiber dimension {min(A.shape)} at {q}")
        for i in range(k_max):
            if dead[i]:
                continue
            Ck = compound(A, i + 1)
            M = Ck @ mats[i] if direction == "forward" else mats[i] @ Ck
            s = float(np.max(np.abs(M), initial=0.0))
            if s == 0.0:
                dead[i] = True
            elif not _RESCALE_LO <= s <= _RESCALE_HI:
                M = M / s
                scales[i] += math.log(s)
            mats[i] = M
        if n in grid:
            ns.append(n)
            for i in range(k_max):
                if dead[i]:
                    vals[i].append(-math.inf)
                    continue
                top = float(np.linalg.norm(mats[i], 2))
                vals[i].append((scales[i] + math.log(top)) / n if top > 0 else -math.inf)
    n_arr = np.array(ns)
    return [GrowthSeries(i + 1, direction, n_arr, np.array(vals[i])) for i in range(k_max)]


def growth_series(c: LinearCocycle, p: BasePoint, k: int, n_max: int,
                  direction: str = "forward", record: Sequence[int] | None = None) -> GrowthSeries:
    """The sequence (1/n) log D_k(psi^n) for one k."""
    k = check_count(k, "k", 1)
    return growth_series_all(c, p, k, n_max, direction, record)[k - 1]


@dataclass(frozen=True, eq=False)
class LyapunovSpectrum:
    """Volume growth rates and the grouped exponents derived from them.

    ``Lambda[k-1]`` is the rate for k-dimensional volumes, ``lam`` the
    increments, ``mu`` the distinct exponents (largest first) with
    multiplicities ``mult`` and cumulative sums ``mtilde``.
    """

    Lambda: tuple[float, ...]
    lam: tuple[float, ...]
    mu: tuple[float, ...]
    mult: tuple[int, ...]
    mtilde: tuple[int, ...]
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return len(self.Lambda)

    @property
    def n_levels(self) -> int:
        return len(self.mu)

    def codim(self, level: int) -> int:
        """codim F_{mu_level} = m~_{level-1}."""
        if level < 1 or level > self.n_levels + 1:
            raise ValueError(f"level {level} out of range 1..{self.n_levels + 1}")
        return 0 if level == 1 else self.mtilde[level - 2]

    def gap(self, level: int) -> float:
        """mu_level - mu_{level+1}; infinite past the last finite level."""
        if level >= self.n_levels:
            return math.inf
        a, b = self.mu[level - 1], self.mu[level]
        if math.isinf(b):
            return math.inf
        return a - b

    def resolved(self, level: int, group_gap: float) -> bool:
        return self.gap(level) >= group_gap

    def to_dict(self) -> dict:
        return {
            "Lambda": [_json_float(v) for v in self.Lambda],
            "lambda": [_json_float(v) for v in self.lam],
            "mu": [_json_float(v) for v in self.mu],
            "mult": list(self.mult),
            "mtilde": list(self.mtilde),
            "status": self.status,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_exponents(cls, exponents: Sequence[float], group_gap: float = 0.1) -> "LyapunovSpectrum":
        """Spectrum with known exponents lambda_1 >= lambda_2 >= ... (one per dimension)."""
        lam = sorted((float(x) for x in exponents), reverse=True)
        Lam = np.cumsum(lam).tolist()
        mu, mult = _group(lam, group_gap)
        return cls(tuple(Lam), tuple(lam), tuple(mu), tuple(mult),
                   tuple(np.cumsum(mult).tolist()), "exact", {})


def _group(lam: Sequence[float], group_gap: float) -> tuple[list[float], list[int]]:
    groups: list[list[float]] = []
    for v in lam:
        if groups:
            prev = groups[-1][-1]
            same = (math.isinf(prev) and math.isinf(v)) or (
                not math.isinf(prev) and not math.isinf(v) and abs(prev - v) <= group_gap)
            if same:
                groups[-1].append(v)
                continue
        groups.append([v])
    mu = [-math.inf if math.isinf(g[0]) else float(np.mean(g)) for g in groups]
    return mu, [len(g) for g in groups]


def estimate_exponents(series: Sequence[GrowthSeries],
                       tolerances: ToleranceConfig = DEFAULT_TOLERANCES) -> LyapunovSpectrum:
    """Extract Lambda_k as tail averages and group the increments into levels.

    The tail is the last quarter of the recorded n. The residual is the
    largest deviation from the tail average; a residual above
    ``fail_threshold`` marks the spectrum ``undecided``.
    """
    series = sorted(series, key=lambda s: s.k)
    if [s.k for s in series] != list(range(1, len(series) + 1)):
        raise ValueError("need growth series for k = 1..k_max without gaps")
    Lam, diag_k, undecided = [], [], []
    for s in series:
        if s.values.shape[0] < 8:
            raise ValueError(f"k={s.k}: at least 8 recorded values are needed")
        q = max(2, s.values.shape[0] // 4)
        tail = s.values[-q:]
        tn = s.n[-q:]
        if np.any(np.isneginf(tail)) or np.any(tail < tolerances.infinity_cut):
            Lam.append(-math.inf)
            diag_k.append({"k": s.k, "tail": int(q), "residual": 0.0, "slope": 0.0,
                           "below_infinity_cut": True})
            continue
        L = float(np.mean(tail))
        resid = float(np.max(np.abs(tail - L)))
        slope = float(np.polyfit(tn.astype(float), tail, 1)[0]) if q >= 2 else 0.0
        Lam.append(L)
        diag_k.append({"k": s.k, "tail": int(q), "residual": resid, "slope": slope,
                       "below_infinity_cut": False})
        if resid > tolerances.fail_threshold:
            undecided.append(s.k)
    lam = []
    prev = 0.0
    for L in Lam:
        if math.isinf(L):
            lam.append(-math.inf)
        else:
            lam.append(L - prev)
            prev = L
    mu, mult = _group(lam, tolerances.group_gap)
    status = "undecided" if undecided else "ok"
    if undecided:
        _log.warning("growth series not settled for k=%s", undecided)
    diagnostics = {"per_k": diag_k, "undecided_k": undecided,
                   "direction": series[0].direction, "n_max": int(series[0].n[-1])}
    return LyapunovSpectrum(tuple(Lam), tuple(lam), tuple(mu), tuple(mult),
                            tuple(int(x) for x in np.cumsum(mult)), status, diagnostics)


def estimate_spectrum(c: LinearCocycle, p: BasePoint, n_max: int, k_max: int | None = None,
                      direction: str = "forward",
                      tolerances: ToleranceConfig = DEFAULT_TOLERANCES) -> LyapunovSpectrum:
    """growth_series_all followed by estimate_exponents."""
    if k_max is None:
        k_max = _default_k_max(c, p, n_max, direction)
    return estimate_exponents(growth_series_all(c, p, k_max, n_max, direction), tolerances)


def slow_space(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, level: int, n: int,
               tolerances: ToleranceConfig = DEFAULT_TOLERANCES) -> Subspace:
    """Estimate of F_{mu_level}(p), the vectors growing at rate at most mu_level.

    It is the Euclidean complement of the m~_{level-1} leading directions of
    the adjoint product (psi^n_p)^T, i.e. the span of the right singular
    vectors of psi^n_p with the smallest singular values. The adjoint
    product is formed by a QR sweep from theta^n p back to p.
    """
    fiber = c.fiber(p)
    m = spec.codim(level)
    if m == 0:
        return Subspace.full(fiber)
    if m >= fiber.dim:
        return Subspace.zero(fiber)
    n = check_count(n, "n", 1)
    dmin = min(c.dim(shift(p, t)) for t in range(n + 1))
    if m > dmin:
        raise UnresolvedLevelError(f"codimension {m} exceeds a fiber dimension along the orbit")
    r = min(m + 1, dmin)
    sw = adjoint_sweep(c, p, n, 0, r)
    if r > m:
        logs = sw.log_growth(range(n))
        gap = (logs[m - 1] - logs[m]) / n
        if not gap >= tolerances.gap_min:
            raise UnresolvedLevelError(
                f"level {level}: singular gap {gap:.3g} per step below gap_min={tolerances.gap_min}")
    return Subspace(fiber, slow_basis(sw.frames[0], m, fiber.dim), check=False)


def _slow_frames(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, level: int,
                 t0: int, t1: int) -> dict[int, np.ndarray]:
    m = spec.codim(level)
    extra = burn_in_for(spec.gap(level - 1) if level >= 2 else math.inf)
    if m == 0:
        return {t: np.eye(c.dim(shift(p, t))) for t in range(t0, t1 + 1)}
    sw = adjoint_sweep(c, p, t1 + extra, t0, m, keep_until=t1)
    return {t: slow_basis(sw.frames[t], m, c.dim(shift(p, t))) for t in range(t0, t1 + 1)}


def vector_growth_rate(c: LinearCocycle, p: BasePoint, x, n: int, direction: str = "forward",
                       within: tuple[LyapunovSpectrum, int] | None = None) -> float:
    """(1/n) log ||psi^n x|| in fiber norms.

    Forward: x is in the fiber at p and is pushed n steps. Backward: x is in
    the fiber at sigma^n p and is pushed n steps to p. With
    ``within=(spectrum, level)`` the vector is kept inside the slow spaces
    of that level along the orbit (orthogonal projection after every step);
    this prevents roundoff from seeding faster directions when the rate of
    a slow vector is measured over long horizons.
    """
    n = check_count(n, "n", 1)
    start = p if direction == "forward" else shift(p, -n)
    x = as_vector(x, c.dim(start))
    if not np.any(x):
        raise ValueError("growth rate of the zero vector is undefined")
    frames = None
    if within is not None:
        spec, level = within
        frames = _slow_frames(c, start, spec, level, 0, n)
        B = frames[0]
        x = B @ (B.T @ x)
    total = 0.0
    q = start
    v = x / fiber_norm(x, c.fiber(start).norm)
    for t in range(n):
        v = c.matrix(q) @ v
        q = shift(q, 1)
        if frames is not None:
            B = frames[t + 1]
            v = B @ (B.T @ v)
        nv = fiber_norm(v, c.fiber(q).norm)
        if nv == 0.0:
            return -math.inf
        total += math.log(nv)
        v = v / nv
    return total / n


@dataclass(frozen=True)
class TemperednessReport:
    """Least-squares slopes of log+ f along the forward and backward orbit."""

    forward_slope: float
    backward_slope: float
    tempered: bool
    n_max: int

    def to_dict(self) -> dict:
        return {"forward_slope": self.forward_slope, "backward_slope": self.backward_slope,
                "tempered": self.tempered, "n_max": self.n_max}


def temperedness_check(sample_fn: Callable[[BasePoint], float], p: BasePoint, n_max: int,
                       tol: float = DEFAULT_TOLERANCES.temper_tol) -> TemperednessReport:
    """Fit log+ f(theta^n p) and log+ f(sigma^n p) against n and report both slopes."""
    n_max = check_count(n_max, "n_max", 2)
    ns = np.arange(n_max + 1, dtype=float)

    def slope(sign: int) -> float:
        vals = np.array([max(0.0, math.log(max(float(sample_fn(shift(p, sign * int(t)))), 1e-300)))
                         for t in ns])
        return float(np.polyfit(ns, vals, 1)[0])

    fwd, bwd = slope(1), slope(-1)
    return TemperednessReport(fwd, bwd, abs(fwd) <= tol and abs(bwd) <= tol, n_max)


def restricted_cocycle(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, level: int,
                       n: int) -> LinearCocycle:
    """psi restricted to the slow spaces of ``level`` along offsets 0..n, in orthonormal coordinates.

    Only valid for base points theta^t p with 0 <= t < n.
    """
    frames = _slow_frames(c, p, spec, level, 0, n)
    dims = {t: frames[t].shape[1] for t in frames}

    def offset(q: BasePoint) -> int:
        t = q.time - p.time
        if t not in frames:
            raise ValueError("base point outside the window of the restricted cocycle")
        return t

    def matrix(q: BasePoint) -> np.ndarray:
        t = offset(q)
        return frames[t + 1].T @ c.matrix(q) @ frames[t]

    return LinearCocycle(FieldSpec(lambda q: dims[offset(q)]), matrix)
