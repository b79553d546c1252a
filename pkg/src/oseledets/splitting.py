"""Fast spaces as limits of backward push-forwards, and the full splitting.

For a level i the fast space at p is the limit of

    psi^n_{sigma^n p}(H^n),   H^n a complement of F_{mu_{i+1}} inside F_{mu_i} at sigma^n p,

as n grows. Slow spaces along the backward orbit come from one adjoint QR
sweep started a little in the future of p; every push-forward is kept
inside F_{mu_i} by an orthogonal projection after each step, which stops
roundoff from feeding faster directions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .base import BasePoint, shift
from .cocycle import CocycleProduct, LinearCocycle, restricted_inverse
from .exceptions import DependentBasisError, UnconvergedError, UnresolvedLevelError
from .geometry import Fiber, Subspace, bounded_complement, fiber_norm, grassmann_dist, projection_norm
from .geometry.distance import volume_of_columns
from .geometry.grassmann import l2_dist
from .geometry.subspace import relative_volume
from .orbit import OrbitFrames, adjoint_sweep, burn_in_for, slow_basis
from .spectrum import LyapunovSpectrum
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = [
    "Splitting",
    "FastSpaceResult",
    "pushforward_sequence",
    "fast_space",
    "oseledets_splitting",
    "cauchy_log",
    "fit_log_slope",
    "orbit_frames",
    "verify_equivariance",
    "verify_rates",
    "verify_volume_sums",
    "projection_norm_sampler",
]

_log = logging.getLogger(__name__)

_POLICY_SEED = 0xC0DE


def _level_bounds(spec: LyapunovSpectrum, level: int, tol: ToleranceConfig) -> tuple[int, int]:
    if level < 1 or level > spec.n_levels:
        raise ValueError(f"level {level} outside 1..{spec.n_levels}")
    if not spec.resolved(level, tol.group_gap):
        raise UnresolvedLevelError(
            f"level {level} is not separated from the next one by group_gap={tol.group_gap}")
    lo = spec.codim(level)
    return lo, spec.mtilde[level - 1]


class _BackwardSlowFrames:
    """Adjoint frames at offsets -n_max..0 from one sweep started at offset ``extra``."""

    def __init__(self, c: LinearCocycle, p: BasePoint, r: int, n_max: int, extra: int) -> None:
        self.sweep = adjoint_sweep(c, p, extra, -n_max, r, keep_until=0)
        self.extra = extra
        self.r = r
        ts = list(range(extra - 1, -n_max - 1, -1))
        cum = np.zeros((len(ts) + 1, r))
        for j, t in enumerate(ts):
            cum[j + 1] = cum[j] + self.sweep.logr[t] if t in self.sweep.logr else cum[j]
        self._cum = {t: cum[j + 1] for j, t in enumerate(ts)}

    def gap(self, t: int, m: int) -> float:
        """Per-step log gap between columns m and m+1 accumulated from the sweep top to t."""
        if m <= 0 or m >= self.r:
            return math.inf
        s = self._cum[t]
        return float((s[m - 1] - s[m]) / (self.extra - t))


def _complement(F_lo: np.ndarray, F_hi_basis: np.ndarray, d: int, policy: str,
                rng: np.random.Generator | None) -> np.ndarray:
    chart = Fiber(d)
    amb = Subspace(chart, F_lo, check=False)
    Fh = Subspace(chart, F_hi_basis, check=False)
    H = bounded_complement(Fh, amb, rng=rng if policy == "random" else None)
    return np.linalg.qr(H.basis)[0]


def _push(c: LinearCocycle, p: BasePoint, X: np.ndarray, n: int, frames: dict[int, np.ndarray],
          m_lo: int) -> np.ndarray:
    """Push X from offset -n to 0, projecting away the m_lo leading adjoint directions."""
    for t in range(-n, 0):
        X = c.matrix(shift(p, t)) @ X
        if m_lo:
            T = frames[t + 1][:, :m_lo]
            X = X - T @ (T.T @ X)
        X = np.linalg.qr(X)[0]
    return X


def pushforward_sequence(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, level: int,
                         n_list, policy: str = "orthogonal", seed: int = _POLICY_SEED,
                         tolerances: ToleranceConfig = DEFAULT_TOLERANCES,
                         extra: int | None = None) -> list[Subspace | None]:
    """Iterates psi^n_{sigma^n p}(H^n) for every n in ``n_list`` (None where the gap check fails).

    ``policy`` selects the complement H^n: ``"orthogonal"`` takes the
    Euclidean complement, ``"random"`` draws random complements that meet
    the sqrt(m)+2 projection bound.
    """
    m_lo, m_hi = _level_bounds(spec, level, tolerances)
    n_list = [int(n) for n in n_list]
    if not n_list:
        return []
    if min(n_list) < 0:
        raise ValueError("push-forward lengths must be >= 0")
    n_max = max(n_list)
    d_p = c.dim(p)
    dmin = min(c.dim(shift(p, t)) for t in range(-n_max, 1))
    if extra is None:
        extra = burn_in_for(min(spec.gap(level), spec.gap(level - 1) if level > 1 else math.inf))
    r = min(m_hi + 1, dmin)
    frames = _BackwardSlowFrames(c, p, r, n_max, extra)
    rng = np.random.default_rng(seed)
    out: list[Subspace | None] = []
    for n in n_list:
        t = -n
        d = c.dim(shift(p, t))
        G = frames.sweep.frames[t]
        bad = [m for m in (m_lo, m_hi) if frames.gap(t, m) < tolerances.gap_min]
        if bad:
            _log.warning("level %d, n=%d: singular gap below gap_min at codimension %s", level, n, bad)
            out.append(None)
            continue
        F_lo = slow_basis(G, m_lo, d)
        F_hi = slow_basis(G, m_hi, d) if m_hi < d else np.zeros((d, 0))
        H = _complement(F_lo, F_hi, d, policy, rng)
        X = _push(c, p, H, n, frames.sweep.frames, m_lo)
        out.append(Subspace(c.fiber(p), X, check=False) if X.shape[0] == d_p else None)
    return out


def fit_log_slope(log: list[tuple[int, float]], floor: float = 1e-13) -> float:
    """Least-squares slope of log d against n over entries above the roundoff floor."""
    pts = [(n, math.log(d)) for n, d in log if d > floor]
    if len(pts) < 2:
        return -math.inf
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def cauchy_log(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, level: int, n_max: int,
               tolerances: ToleranceConfig = DEFAULT_TOLERANCES) -> list[tuple[int, float]]:
    """d_H between consecutive push-forward iterates, n = 1..n_max-1, in the Euclidean chart."""
    seq = pushforward_sequence(c, p, spec, level, range(1, n_max + 1), tolerances=tolerances)
    out = []
    for n, (a, b) in enumerate(zip(seq, seq[1:]), start=1):
        if a is not None and b is not None:
            out.append((n, l2_dist(a.orthonormal(), b.orthonormal())))
    return out


@dataclass
class FastSpaceResult:
    """Outcome of the convergence loop for one level."""

    level: int
    subspace: Subspace | None
    status: str
    n: int | None
    convergence_log: list[tuple[int, float]]
    uniqueness_distance: float | None = None

    def to_dict(self) -> dict:
        return {
            "level": self.level, "status": self.status, "n": self.n,
            "basis": None if self.subspace is None else self.subspace.basis.T.tolist(),
            "convergence_log": [[int(n), float(d)] for n, d in self.convergence_log],
            "uniqueness_distance": self.uniqueness_distance,
        }


def _converge(c, p, spec, level, tolerances, policy, seed) -> tuple[Subspace | None, int | None, list]:
    stride = tolerances.stride
    log: list[tuple[int, float]] = []
    chunk = 40
    done: dict[int, Subspace | None] = {}
    while True:
        n_top = min(chunk, tolerances.n_cap)
        ns = list(range(1, n_top + 1, stride))
        seq = pushforward_sequence(c, p, spec, level, ns, policy=policy, seed=seed,
                                   tolerances=tolerances)
        done.update(zip(ns, seq))
        log = []
        for a, b in zip(ns, ns[1:]):
            A, B = done[a], done[b]
            if A is None or B is None:
                continue
            dist = l2_dist(A.orthonormal(), B.orthonormal())
            log.append((a, dist))
            if dist < tolerances.d_H_tol:
                return A, a, log
        if n_top >= tolerances.n_cap:
            return None, None, log
        chunk *= 2


def fast_space(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, level: int,
               tolerances: ToleranceConfig = DEFAULT_TOLERANCES, check_unique: bool = True,
               seed: int = _POLICY_SEED) -> FastSpaceResult:
    """The fast space H^level at p, with convergence log and a uniqueness cross-check.

    Iterates 5 apart are compared until their distance drops below
    ``d_H_tol``. The computation is then repeated with random complements;
    the two limits must agree to 3 * d_H_tol.
    """
    H, n, log = _converge(c, p, spec, level, tolerances, "orthogonal", seed)
    if H is None:
        _log.warning("level %d did not converge by n_cap=%d", level, tolerances.n_cap)
        return FastSpaceResult(level, None, "unconverged", None, log)
    res = FastSpaceResult(level, H, "converged", n, log)
    if check_unique:
        H2, _, _ = _converge(c, p, spec, level, tolerances, "random", seed + 1)
        if H2 is None:
            res.status = "unconverged"
        else:
            res.uniqueness_distance = l2_dist(H.orthonormal(), H2.orthonormal())
            if res.uniqueness_distance > 3 * tolerances.d_H_tol:
                res.status = "not_unique"
    return res


@dataclass
class Splitting:
    """E_p = H^1 + ... + H^j + F_{mu_{j+1}}(p) with its diagnostics."""

    base_point: BasePoint
    fast: list[Subspace]
    slow_tail: Subspace
    spectrum: LyapunovSpectrum
    projection_norms: list[dict] = field(default_factory=list)
    convergence_logs: list[list[tuple[int, float]]] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)
    uniqueness: list[float | None] = field(default_factory=list)
    tolerances: ToleranceConfig = DEFAULT_TOLERANCES

    @property
    def levels(self) -> int:
        return len(self.fast)

    @property
    def converged(self) -> bool:
        return all(s == "converged" for s in self.statuses)

    def to_dict(self) -> dict:
        return {
            "base_point": {"seed": self.base_point.seed, "time": self.base_point.time},
            "levels": self.levels,
            "fast": [h.basis.T.tolist() for h in self.fast],
            "slow_tail": self.slow_tail.basis.T.tolist(),
            "statuses": list(self.statuses),
            "uniqueness_distance": list(self.uniqueness),
            "projection_norms": self.projection_norms,
            "convergence_logs": [[[int(n), float(d)] for n, d in lg] for lg in self.convergence_logs],
        }


def oseledets_splitting(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, levels: int,
                        tolerances: ToleranceConfig = DEFAULT_TOLERANCES,
                        check_unique: bool = True) -> Splitting:
    """Assemble the splitting for levels 1..``levels`` and check joint independence."""
    fiber = c.fiber(p)
    if levels < 0 or levels > spec.n_levels:
        raise ValueError(f"levels must lie in 0..{spec.n_levels}")
    fast, logs, statuses, uniq = [], [], [], []
    for i in range(1, levels + 1):
        res = fast_space(c, p, spec, i, tolerances, check_unique=check_unique)
        if res.subspace is None:
            raise UnconvergedError(f"fast space of level {i} did not converge", res.convergence_log)
        fast.append(Subspace(fiber, res.subspace.basis, check=False))
        logs.append(res.convergence_log)
        statuses.append(res.status)
        uniq.append(res.uniqueness_distance)
    m = spec.mtilde[levels - 1] if levels else 0
    if m >= fiber.dim:
        tail = Subspace.zero(fiber)
    else:
        n = burn_in_for(spec.gap(levels)) if levels else 1
        r = min(m + 1, fiber.dim) if levels else 0
        if r:
            sw = adjoint_sweep(c, p, n, 0, r)
            tail = Subspace(fiber, slow_basis(sw.frames[0], m, fiber.dim), check=False)
        else:
            tail = Subspace.full(fiber)
    allb = np.hstack([h.basis for h in fast] + [tail.basis])
    if allb.shape[1] != fiber.dim or relative_volume(allb) <= tolerances.rank_tol:
        raise DependentBasisError("fast spaces and slow tail are not jointly independent")
    norms = []
    for i, h in enumerate(fast):
        rest = np.hstack([g.basis for g in fast[i + 1:]] + [tail.basis])
        kernel = Subspace(fiber, rest, check=False)
        norms.append({
            "level": i + 1,
            "fast_along_slow": projection_norm(h, kernel, n_starts=tolerances.n_starts).value,
            "slow_along_fast": projection_norm(kernel, h, n_starts=tolerances.n_starts).value,
        })
    if fast and tail.dim:
        U = Subspace(fiber, np.hstack([h.basis for h in fast]), check=False)
        norms.append({"level": "sum", "fast_along_slow": projection_norm(U, tail).value,
                      "slow_along_fast": projection_norm(tail, U).value})
    for entry in norms:
        _log.info("projection norms %s", entry)
    return Splitting(p, fast, tail, spec, norms, logs, statuses, uniq, tolerances)


def verify_equivariance(c: LinearCocycle, s: Splitting, k: int) -> dict:
    """d_H between psi^k(H^i_p) and H^i at theta^k p for every level."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return {"k": 0, "distances": [0.0] * s.levels}
    q = shift(s.base_point, k)
    other = oseledets_splitting(c, q, s.spectrum, s.levels, s.tolerances, check_unique=False)
    dists = []
    for h, g in zip(s.fast, other.fast):
        X = h.basis
        for t in range(k):
            X = np.linalg.qr(c.matrix(shift(s.base_point, t)) @ X)[0]
        img = Subspace(g.fiber, X, check=False)
        dists.append(float(grassmann_dist(img, g).value))
    return {"k": k, "distances": dists}


def orbit_frames(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, levels: int,
                 t0: int, t1: int, burn_in: int | None = None) -> OrbitFrames:
    """OrbitFrames for levels 1..``levels`` (plus the slow tail) over offsets t0..t1."""
    if levels < 1:
        raise ValueError("need at least one level")
    gaps = [spec.gap(i) for i in range(1, levels + 1)]
    if burn_in is None:
        burn_in = burn_in_for(min(gaps))
    return OrbitFrames(c, p, list(spec.mtilde[:levels]), t0, t1, burn_in)


def _align(h: np.ndarray, B: np.ndarray) -> np.ndarray:
    return B.T @ h


def verify_rates(c: LinearCocycle, s: Splitting, n: int) -> dict:
    """Forward and backward growth rates of fast vectors, compared against +-mu_i.

    Fast vectors are propagated in coordinates of the fast spaces along the
    orbit; the backward rate applies the restricted inverse one step at a
    time.
    """
    p = s.base_point
    J = s.levels
    if J == 0:
        return {"n": n, "levels": []}
    of = orbit_frames(c, p, s.spectrum, J, -n, n)
    out = []
    for i in range(1, J + 1):
        mu = s.spectrum.mu[i - 1]
        B0 = of.fast(0, i)
        fwd_rates, bwd_rates = [], []
        for h in s.fast[i - 1].vectors:
            coef = _align(h, B0)
            total, B = 0.0, B0
            for t in range(n):
                Bn = of.fast(t + 1, i)
                coef = of.restricted(t, B, Bn) @ coef
                B = Bn
                nv = fiber_norm(B @ coef, of.fiber(t + 1).norm)
                total += math.log(nv)
                coef = coef / nv
            fwd_rates.append(total / n)
            coef = _align(h, B0)
            total, B = 0.0, B0
            for t in range(-1, -n - 1, -1):
                Bp = of.fast(t, i)
                prod = CocycleProduct(shift(p, t), 1, c.matrix(shift(p, t)), 0.0)
                inv = restricted_inverse(prod, Subspace(of.fiber(t + 1), B, check=False),
                                         Subspace(of.fiber(t), Bp, check=False))
                coef = inv @ coef
                B = Bp
                nv = fiber_norm(B @ coef, of.fiber(t).norm)
                total += math.log(nv)
                coef = coef / nv
            bwd_rates.append(total / n)
        out.append({"level": i, "mu": mu, "forward": fwd_rates, "backward": bwd_rates,
                    "forward_error": max(abs(r - mu) for r in fwd_rates),
                    "backward_error": max(abs(r + mu) for r in bwd_rates)})
    tail = None
    if s.slow_tail.dim and J < s.spectrum.n_levels:
        m = s.spectrum.mtilde[J - 1]
        x = s.slow_tail.basis[:, 0]
        total = 0.0
        B = of.slow(0, m)
        v = B @ (B.T @ x)
        v = v / fiber_norm(v, of.fiber(0).norm)
        for t in range(n):
            v = c.matrix(shift(p, t)) @ v
            B = of.slow(t + 1, m)
            v = B @ (B.T @ v)
            nv = fiber_norm(v, of.fiber(t + 1).norm)
            total += math.log(nv)
            v = v / nv
        tail = {"rate": total / n, "mu_next": s.spectrum.mu[J]}
    return {"n": n, "levels": out, "slow_tail": tail}


def verify_volume_sums(c: LinearCocycle, s: Splitting, n: int) -> dict:
    """Forward and backward volume growth of the concatenated fast bases against +-sum m_i mu_i."""
    p = s.base_point
    J = s.levels
    if J == 0:
        return {"n": n, "forward": 0.0, "backward": 0.0, "expected": 0.0}
    of = orbit_frames(c, p, s.spectrum, J, -n, n)
    m = s.spectrum.mtilde[J - 1]
    expected = float(sum(mi * mu for mi, mu in zip(s.spectrum.mult[:J], s.spectrum.mu[:J])))
    X0 = np.hstack([h.basis for h in s.fast])
    rates = {}
    for direction, sign in (("forward", 1), ("backward", -1)):
        B = of.flag(0, m)
        coef = B.T @ X0
        acc = 0.0
        t = 0
        for _ in range(n):
            if sign > 0:
                Bn = of.flag(t + 1, m)
                coef = of.restricted(t, B, Bn) @ coef
                t += 1
            else:
                Bn = of.flag(t - 1, m)
                coef = np.linalg.solve(of.restricted(t - 1, Bn, B), coef)
                t -= 1
            B = Bn
            q, r = np.linalg.qr(coef)
            acc += float(np.sum(np.log(np.abs(np.diag(r)))))
            coef = q
        vol = volume_of_columns(B @ coef, of.fiber(t).norm)
        rates[direction] = (acc + math.log(vol)) / n
    return {"n": n, "forward": rates["forward"], "backward": rates["backward"],
            "expected": expected,
            "forward_error": abs(rates["forward"] - expected),
            "backward_error": abs(rates["backward"] + expected)}


def projection_norm_sampler(c: LinearCocycle, p: BasePoint, spec: LyapunovSpectrum, levels: int,
                            n: int):
    """Function q -> ||Pi_{H^1+...+H^levels || F_{mu_{levels+1}}}|| on sigma^n p .. theta^n p."""
    of = orbit_frames(c, p, spec, levels, -n, n)
    m = spec.mtilde[levels - 1]

    def sample(q: BasePoint) -> float:
        t = q.time - p.time
        fiber = of.fiber(t)
        if m >= fiber.dim:
            return 1.0
        U = Subspace(fiber, of.flag(t, m), check=False)
        F = Subspace(fiber, of.slow(t, m), check=False)
        return projection_norm(U, F).value

    return sample
