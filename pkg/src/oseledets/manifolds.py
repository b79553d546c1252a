"""Local stable and unstable manifolds by Lyapunov-Perron iteration.

Both constructions work in coordinates adapted to an invariant splitting
E = S + U along the orbit of the base point. With orthonormal bases of S and
U at each orbit point, the linear cocycle restricted to S and to U becomes a
sequence of small matrices, and one application of the Lyapunov-Perron
operator is two recursions:

* stable side (forward orbit, index n is offset +n): the S-coordinates run
  forward from the parameter, the U-coordinates run backward from zero at
  the horizon;
* unstable side (backward orbit, index n is offset -n): the U-coordinates
  run from the parameter towards the past, the S-coordinates are summed from
  the horizon towards the present.

Infinite series and suprema are truncated at the horizon N. The size of the
dropped tail is bounded with the measured constants and reported.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ._validation import as_vector, check_count
from .base import BasePoint, shift
from .cocycle import NonlinearCocycle, perron_residual
from .exceptions import BoundViolation, NonHyperbolicError, UnconvergedError
from .geometry import Subspace, grassmann_delta, projection_norm
from .geometry._search import maximize_on_spheres
from .geometry.norms import L2, fiber_norm
from .geometry.subspace import relative_volume
from .orbit import OrbitFrames, burn_in_for
from .spectrum import LyapunovSpectrum, estimate_spectrum
from .splitting import fit_log_slope
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

__all__ = [
    "WeightedSequence",
    "PerronContext",
    "ManifoldChart",
    "perron_context",
    "compute_h1_h2",
    "perron_radius",
    "inverse_h",
    "perron_map_stable",
    "perron_map_unstable",
    "solve_stable",
    "solve_unstable",
    "fixed_point_orbit_check",
    "stable_chart",
    "unstable_chart",
    "chart_points",
    "tangency_check",
    "transversality_check",
    "membership",
    "invariance_check",
    "pairwise_contraction",
    "parameter_lipschitz_check",
    "uniqueness_check",
    "stable_growth_sampler",
]

_log = logging.getLogger(__name__)

KINDS = ("stable", "unstable")
_FIT_HORIZON = 20


@dataclass(frozen=True, eq=False)
class WeightedSequence:
    """Entries Gamma_0..Gamma_N along the forward or backward orbit of a base point.

    Entry j lives in the fiber at offset +j (forward) or -j (backward).
    """

    base_point: BasePoint
    direction: str
    upsilon: float
    entries: tuple[np.ndarray, ...]
    norms: tuple[Any, ...]

    @property
    def horizon(self) -> int:
        return len(self.entries) - 1

    def entry_norms(self) -> np.ndarray:
        return np.array([fiber_norm(x, n) for x, n in zip(self.entries, self.norms)])

    @property
    def norm(self) -> float:
        """max_j exp(upsilon j) ||Gamma_j||."""
        w = np.exp(self.upsilon * np.arange(len(self.entries)))
        return float(np.max(w * self.entry_norms()))

    def __sub__(self, other: "WeightedSequence") -> "WeightedSequence":
        return WeightedSequence(self.base_point, self.direction, self.upsilon,
                                tuple(a - b for a, b in zip(self.entries, other.entries)),
                                self.norms)

    def to_dict(self) -> dict:
        return {"direction": self.direction, "upsilon": self.upsilon, "horizon": self.horizon,
                "entries": [e.tolist() for e in self.entries]}


def inverse_h(h, y: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """The x >= 0 with h(x) = y for a strictly increasing h with h(0) = 0."""
    if y <= 0:
        return 0.0
    if math.isinf(y):
        return math.inf
    hi = 1.0
    for _ in range(max_iter):
        if h(hi) >= y:
            break
        hi *= 2.0
    else:
        return math.inf
    lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if h(mid) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def perron_radius(h1: float, h2: float, rho_tilde: float, h) -> tuple[float, float]:
    """(R, H1) with H1 = min{h^{-1}(1/(2 h2)) / 2, rho_tilde} and R = H1 / (2 h1)."""
    target = math.inf if h2 == 0 else 1.0 / (2.0 * h2)
    H1 = min(0.5 * inverse_h(h, target), rho_tilde)
    return H1 / (2.0 * h1), H1


def _restricted_norm(M: np.ndarray, B_in: np.ndarray, B_out: np.ndarray, n_in, n_out,
                     n_starts: int = 8) -> float:
    """sup ||B_out M c|| / ||B_in c|| over coordinate vectors c."""
    if M.size == 0:
        return 0.0
    if n_in.is_l2 and n_out.is_l2:
        return float(np.linalg.norm(M, 2))
    if M.shape[1] == 1:
        return fiber_norm(B_out @ M[:, 0], n_out) / fiber_norm(B_in[:, 0], n_in)

    def objective(c: np.ndarray) -> float:
        return fiber_norm(B_out @ (M @ c[:, 0]), n_out) / max(fiber_norm(B_in @ c[:, 0], n_in), 1e-300)

    return maximize_on_spheres(objective, L2, M.shape[1], 1, n_starts=n_starts)


@dataclass(eq=False)
class PerronContext:
    """Orbit data for one Lyapunov-Perron construction.

    Index n refers to the orbit point at offset +n (stable) or -n (unstable).
    ``S[n]`` and ``U[n]`` are orthonormal bases, ``W[n]`` the inverse of
    ``[S[n] U[n]]`` (its first rows give S-coordinates along U, the rest
    U-coordinates along S). ``CS[n]``/``CU[n]`` are the coordinate matrices
    of the linear cocycle: from index n to n+1 (stable) or from n to n-1
    (unstable, ``CS[0]`` unused).
    """

    nc: NonlinearCocycle
    base_point: BasePoint
    kind: str
    upsilon: float
    N: int
    spectrum: LyapunovSpectrum
    level: int
    S: list
    U: list
    W: list
    CS: list
    CU: list
    proj_S: np.ndarray
    proj_U: np.ndarray
    f: np.ndarray
    rho: np.ndarray
    tolerances: ToleranceConfig
    h1: float = math.nan
    h2: float = math.nan
    rho_tilde: float = math.nan
    H1: float = math.nan
    R: float = math.nan
    rho1: float = math.nan
    epsilon: float = math.nan
    remainder_factor: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def direction(self) -> str:
        return "forward" if self.kind == "stable" else "backward"

    @property
    def rho2(self) -> float:
        # ||Gamma(v)|| <= 2 h1 ||v|| < 2 h1 R = H1 for every chart point
        return self.H1

    @property
    def r(self) -> float:
        return self.nc.nonlinearity.r

    def h(self, x: float) -> float:
        return self.nc.nonlinearity.h(x)

    def point(self, n: int) -> BasePoint:
        return shift(self.base_point, n if self.kind == "stable" else -n)

    def norm_at(self, n: int):
        return self.nc.fiber(self.point(n)).norm

    def stationary(self, n: int) -> np.ndarray:
        return self.nc.stationary(self.point(n))

    @property
    def param_dim(self) -> int:
        return (self.S if self.kind == "stable" else self.U)[0].shape[1]

    @property
    def param_basis(self) -> np.ndarray:
        """Orthonormal basis of the parameter space (S or U at the base point)."""
        return (self.S if self.kind == "stable" else self.U)[0]

    @property
    def complement_basis(self) -> np.ndarray:
        return (self.U if self.kind == "stable" else self.S)[0]

    def split(self, n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(S-coordinates, U-coordinates) of x at index n."""
        c = self.W[n] @ x
        s = self.S[n].shape[1]
        return c[:s], c[s:]

    def parameter_coords(self, v) -> np.ndarray:
        """Coordinates of a parameter given as a vector of the fiber in the parameter space."""
        v = as_vector(v, self.S[0].shape[0], "parameter")
        B = self.param_basis
        c = B.T @ v
        if np.linalg.norm(v - B @ c) > 1e-9 * max(1.0, float(np.linalg.norm(v))):
            raise ValueError(f"parameter is not in the {'S' if self.kind == 'stable' else 'U'} space")
        return c

    def parameter_norm(self, v) -> float:
        return fiber_norm(self.param_basis @ self.parameter_coords(v), self.norm_at(0))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "upsilon": self.upsilon, "N": self.N, "level": self.level,
            "h1": self.h1, "h2": self.h2, "rho_tilde": self.rho_tilde, "H1": self.H1,
            "R": self.R, "rho1": self.rho1, "rho2": self.rho2, "epsilon": self.epsilon,
            "remainder_factor": self.remainder_factor,
            "param_dim": self.param_dim,
            "param_basis": self.param_basis.tolist(),
            "spectrum_mu": [None if math.isinf(m) else m for m in self.spectrum.mu],
            "diagnostics": self.diagnostics,
        }


def _split_index(spec: LyapunovSpectrum, kind: str, upsilon: float) -> tuple[int, int]:
    """(level, m): the level bounding the split and the dimension of the fast part U."""
    mu = spec.mu
    if kind == "stable":
        neg = [i for i, m in enumerate(mu, 1) if m < 0]
        if not neg:
            raise ValueError("no negative exponent: the stable space is trivial")
        j0 = neg[0]
        bound = -mu[j0 - 1]
        if not (0 < upsilon < bound - 1e-12):
            raise ValueError(f"upsilon={upsilon} outside the window (0, {bound})")
        return j0, spec.codim(j0)
    pos = [i for i, m in enumerate(mu, 1) if m > 0]
    if not pos:
        raise ValueError("no positive exponent: the unstable space is trivial")
    k0 = pos[-1]
    bound = mu[k0 - 1]
    if not (0 < upsilon < bound - 1e-12):
        raise ValueError(f"upsilon={upsilon} outside the window (0, {bound})")
    return k0, spec.mtilde[k0 - 1]


def perron_context(nc: NonlinearCocycle, p: BasePoint, kind: str, upsilon: float, N: int = 40,
                   spectrum: LyapunovSpectrum | None = None,
                   tolerances: ToleranceConfig = DEFAULT_TOLERANCES,
                   n_spectrum: int = 2000, burn_in: int | None = None) -> PerronContext:
    """Splitting, coordinate maps and contraction constants along the orbit of p.

    Raises ValueError when upsilon is not inside the admissible window.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    N = check_count(N, "N", 1)
    upsilon = float(upsilon)
    lin = nc.linearization()
    if spectrum is None:
        spectrum = estimate_spectrum(lin, p, n_spectrum, tolerances=tolerances)
    level, m = _split_index(spectrum, kind, upsilon)
    if kind == "stable":
        gap = spectrum.mu[level - 2] - spectrum.mu[level - 1] if level >= 2 else math.inf
        t0, t1 = 0, N + 1
    else:
        gap = spectrum.gap(level)
        t0, t1 = -(N + 1), 0
    if burn_in is None:
        burn_in = burn_in_for(gap if math.isfinite(gap) else 1.0)
    frames = OrbitFrames(lin, p, [m] if m else [], t0, t1, burn_in)
    sign = 1 if kind == "stable" else -1
    S, U, W = [], [], []
    for n in range(N + 2):
        t = sign * n
        Sb, Ub = frames.slow(t, m), frames.flag(t, m)
        J = np.hstack([Sb, Ub])
        if relative_volume(J) <= tolerances.rank_tol:
            raise NonHyperbolicError(f"S and U are not complementary at offset {t}")
        S.append(Sb)
        U.append(Ub)
        W.append(np.linalg.inv(J))
    CS, CU = [], []
    if kind == "stable":
        for n in range(N + 1):
            CS.append(frames.restricted(n, S[n], S[n + 1]))
            CU.append(frames.restricted(n, U[n], U[n + 1]))
    else:
        CS.append(None)
        CU.append(None)
        for n in range(1, N + 2):
            CS.append(frames.restricted(-n, S[n], S[n - 1]))
            CU.append(frames.restricted(-n, U[n], U[n - 1]))
    proj_S, proj_U = [], []
    inv_err = 0.0
    for n in range(N + 2):
        fib = nc.fiber(shift(p, sign * n))
        Ss, Us = Subspace(fib, S[n], check=False), Subspace(fib, U[n], check=False)
        proj_S.append(projection_norm(Ss, Us).value)
        proj_U.append(projection_norm(Us, Ss).value)
    # invariance defect of the computed splitting (A S_n vs S_{n+1} in the L2 chart)
    for n in range(N + 1):
        src, dst = (n, n + 1) if kind == "stable" else (n + 1, n)
        A = lin.matrix(shift(p, sign * n if kind == "stable" else -(n + 1)))
        for B_src, B_dst in ((S[src], S[dst]), (U[src], U[dst])):
            if B_src.shape[1]:
                img = A @ B_src
                inv_err = max(inv_err, float(np.linalg.norm(img - B_dst @ (B_dst.T @ img))
                                             / max(np.linalg.norm(img), 1e-300)))
    nl = nc.nonlinearity
    f = np.array([nl.f_fn(shift(p, sign * n)) for n in range(N + 2)], dtype=float)
    rho = np.array([nl.rho_fn(shift(p, sign * n)) for n in range(N + 2)], dtype=float)
    ctx = PerronContext(nc, p, kind, upsilon, N, spectrum, level, S, U, W, CS, CU,
                        np.array(proj_S), np.array(proj_U), f, rho, tolerances)
    ctx.diagnostics["invariance_defect"] = inv_err
    ctx.diagnostics["burn_in"] = int(burn_in)
    ctx.epsilon = min(gap if math.isfinite(gap) else upsilon, upsilon) / 10.0
    ctx.h1, ctx.h2 = compute_h1_h2(ctx)
    ctx.rho_tilde = float(np.min(np.exp(upsilon * np.arange(N + 1)) * rho[:N + 1]))
    ctx.R, ctx.H1 = perron_radius(ctx.h1, ctx.h2, ctx.rho_tilde, ctx.h)
    ctx.rho1 = min(inverse_h(ctx.h, math.inf if ctx.h2 == 0 else 1.0 / ctx.h2), ctx.R / 2.0, ctx.H1)
    ctx.remainder_factor = _remainder_factor(ctx)
    if not (ctx.R > 0 and math.isfinite(ctx.h1) and math.isfinite(ctx.h2)):
        raise BoundViolation("radius", f"non-positive radius R={ctx.R}")
    return ctx


def _products_S(ctx: PerronContext) -> dict[tuple[int, int], float]:
    """Norms of the restricted S-products between indices (src, dst)."""
    out = {}
    N = ctx.N
    for src in range(N + 2):
        M = np.eye(ctx.S[src].shape[1])
        out[(src, src)] = _restricted_norm(M, ctx.S[src], ctx.S[src], ctx.norm_at(src), ctx.norm_at(src))
        if ctx.kind == "stable":
            for dst in range(src + 1, N + 2):
                M = ctx.CS[dst - 1] @ M
                out[(src, dst)] = _restricted_norm(M, ctx.S[src], ctx.S[dst],
                                                   ctx.norm_at(src), ctx.norm_at(dst))
        else:
            for dst in range(src - 1, -1, -1):
                M = ctx.CS[dst + 1] @ M
                out[(src, dst)] = _restricted_norm(M, ctx.S[src], ctx.S[dst],
                                                   ctx.norm_at(src), ctx.norm_at(dst))
    return out


def _inverse_products_U(ctx: PerronContext) -> dict[tuple[int, int], float]:
    """Norms of inverses of restricted U-products, keyed by (src, dst) of the forward map."""
    out = {}
    N = ctx.N
    u = ctx.U[0].shape[1]
    if u == 0:
        return out
    for src in range(N + 2):
        Minv = np.eye(u)
        if ctx.kind == "stable":
            for dst in range(src + 1, N + 2):
                # (CU[dst-1] ... CU[src])^{-1} = CU[src]^{-1} ... CU[dst-1]^{-1}
                Minv = Minv @ np.linalg.inv(ctx.CU[dst - 1])
                out[(src, dst)] = _restricted_norm(Minv, ctx.U[dst], ctx.U[src],
                                                   ctx.norm_at(dst), ctx.norm_at(src))
        else:
            for dst in range(src - 1, -1, -1):
                Minv = Minv @ np.linalg.inv(ctx.CU[dst + 1])
                out[(src, dst)] = _restricted_norm(Minv, ctx.U[dst], ctx.U[src],
                                                   ctx.norm_at(dst), ctx.norm_at(src))
    return out


def compute_h1_h2(ctx: PerronContext) -> tuple[float, float]:
    """Truncated suprema h1, h2 (stable) or their backward analogs (unstable)."""
    N, ups, r = ctx.N, ctx.upsilon, ctx.r
    PS = _products_S(ctx)
    PU = _inverse_products_U(ctx)
    ctx.diagnostics["_PS"], ctx.diagnostics["_PU"] = PS, PU
    h1 = 0.0
    h2 = 0.0
    if ctx.kind == "stable":
        for n in range(N + 1):
            h1 = max(h1, math.exp(n * ups) * PS[(0, n)])
            acc = 0.0
            for j in range(n):
                acc += (math.exp(-j * ups * (1 + r)) * ctx.f[j] * PS[(j + 1, n)]
                        * ctx.proj_S[j + 1])
            if PU:
                for j in range(n, N + 1):
                    acc += (math.exp(-j * ups * (1 + r)) * ctx.f[j] * PU[(n, j + 1)]
                            * ctx.proj_U[j + 1])
            h2 = max(h2, math.exp(n * ups) * acc)
    else:
        for n in range(N + 1):
            h1 = max(h1, math.exp(n * ups) * (1.0 if n == 0 else PU[(n, 0)]))
            acc = 0.0
            for k in range(n):
                acc += (math.exp(-ups * (n - k) * (1 + r)) * ctx.f[n - k]
                        * PU[(n, n - k - 1)] * ctx.proj_U[n - 1 - k])
            if ctx.S[0].shape[1]:
                for k in range(n, N):
                    acc += (math.exp(-ups * (k + 1) * (1 + r)) * ctx.f[k + 1]
                            * PS[(k, n)] * ctx.proj_S[k])
            h2 = max(h2, math.exp(n * ups) * acc)
    return float(h1), float(h2)


def _remainder_factor(ctx: PerronContext) -> float:
    """Bound on the weighted norm of the truncated tail, per unit of ||Gamma|| h(||Gamma||)."""
    N, ups, r, eps = ctx.N, ctx.upsilon, ctx.r, ctx.epsilon
    mu = ctx.spectrum.mu
    fbar = float(np.max(ctx.f))
    if ctx.kind == "stable":
        if ctx.U[0].shape[1] == 0:
            return 0.0
        mu_u = mu[ctx.level - 2]
        PU = ctx.diagnostics["_PU"]
        K = max(PU[(n, j + 1)] * ctx.proj_U[j + 1] * math.exp((j - n + 1) * (mu_u - eps))
                for n in range(N + 1) for j in range(n, N + 1))
        kappa = mu_u - eps + ups * (1 + r)
        return float(K * fbar * math.exp(N * ups + (N - 1) * (mu_u - eps) - (N + 1) * kappa)
                     / (1.0 - math.exp(-kappa)))
    if ctx.S[0].shape[1] == 0:
        return 0.0
    mu_s = mu[ctx.level] if ctx.level < len(mu) else -math.inf
    mu_s = max(mu_s, -50.0)
    PS = ctx.diagnostics["_PS"]
    K = max(PS[(k, n)] * ctx.proj_S[k] * math.exp(-(k - n) * (mu_s + eps))
            for n in range(N + 1) for k in range(n, N + 1))
    q = mu_s + eps - ups * (1 + r)
    return float(K * fbar * math.exp(N * ups - (N + 1) * ups * (1 + r)) / (1.0 - math.exp(q)))


def _zero_sequence(ctx: PerronContext) -> WeightedSequence:
    N = ctx.N
    return WeightedSequence(ctx.base_point, ctx.direction, ctx.upsilon,
                            tuple(np.zeros(ctx.S[n].shape[0]) for n in range(N + 1)),
                            tuple(ctx.norm_at(n) for n in range(N + 1)))


def _check_sequence(ctx: PerronContext, G: WeightedSequence) -> None:
    if G.horizon != ctx.N or G.direction != ctx.direction:
        raise ValueError("sequence does not match the context horizon or direction")
    for n, e in enumerate(G.entries):
        if e.shape != (ctx.S[n].shape[0],):
            raise ValueError(f"entry {n} has shape {e.shape}, fiber dimension {ctx.S[n].shape[0]}")


def _residuals(ctx: PerronContext, G: WeightedSequence) -> list[np.ndarray]:
    """P at each orbit point, evaluated on the entries of G."""
    return [perron_residual(ctx.nc, ctx.point(j), G.entries[j]) for j in range(ctx.N + 1)]


def perron_map_stable(ctx: PerronContext, v, G: WeightedSequence) -> WeightedSequence:
    """One application of the stable Lyapunov-Perron operator at parameter v in S."""
    if ctx.kind != "stable":
        raise ValueError("context is not a stable one")
    _check_sequence(ctx, G)
    N = ctx.N
    cv = ctx.parameter_coords(v)
    P = _residuals(ctx, G)
    a, b = [], []
    for j in range(N + 1):
        sj, uj = ctx.split(j + 1, P[j])
        a.append(sj)
        b.append(uj)
    s = [cv]
    for n in range(1, N + 1):
        s.append(ctx.CS[n - 1] @ s[-1] + a[n - 1])
    u = [None] * (N + 2)
    u[N + 1] = np.zeros(ctx.U[0].shape[1])
    for n in range(N, -1, -1):
        u[n] = np.linalg.solve(ctx.CU[n], u[n + 1] - b[n]) if u[n + 1].size else u[n + 1]
    entries = tuple(ctx.S[n] @ s[n] + ctx.U[n] @ u[n] for n in range(N + 1))
    return WeightedSequence(ctx.base_point, "forward", ctx.upsilon, entries, G.norms)


def perron_map_unstable(ctx: PerronContext, u, G: WeightedSequence) -> WeightedSequence:
    """One application of the unstable Lyapunov-Perron operator at parameter u in U."""
    if ctx.kind != "unstable":
        raise ValueError("context is not an unstable one")
    _check_sequence(ctx, G)
    N = ctx.N
    cu = ctx.parameter_coords(u)
    P = _residuals(ctx, G)
    # P at index m lands at index m-1
    a, b = [None] * (N + 1), [None] * (N + 1)
    for m in range(1, N + 1):
        sm, um = ctx.split(m - 1, P[m])
        a[m - 1] = sm
        b[m] = um
    uc = [cu]
    for n in range(1, N + 1):
        uc.append(np.linalg.solve(ctx.CU[n], uc[-1] - b[n]) if cu.size else cu)
    sc = [None] * (N + 1)
    sc[N] = np.zeros(ctx.S[0].shape[1])
    for n in range(N - 1, -1, -1):
        sc[n] = a[n] + ctx.CS[n + 1] @ sc[n + 1] if sc[n + 1].size else sc[n + 1]
    entries = tuple(ctx.S[n] @ sc[n] + ctx.U[n] @ uc[n] for n in range(N + 1))
    return WeightedSequence(ctx.base_point, "backward", ctx.upsilon, entries, G.norms)


@dataclass
class FixedPoint:
    sequence: WeightedSequence
    residual: float
    iterations: int
    residual_log: list[float]
    ratios: list[float]
    remainder_bound: float

    @property
    def point_offset(self) -> np.ndarray:
        """Pi^0 Gamma: the offset of the chart point from the stationary solution."""
        return self.sequence.entries[0]


def _solve(ctx: PerronContext, v, G0: WeightedSequence | None, require_radius: bool) -> FixedPoint:
    tol = ctx.tolerances
    step = perron_map_stable if ctx.kind == "stable" else perron_map_unstable
    norm_v = ctx.parameter_norm(v)
    if require_radius and norm_v >= ctx.R:
        raise ValueError(f"parameter norm {norm_v:.6g} is not below the radius R={ctx.R:.6g}")
    G = _zero_sequence(ctx) if G0 is None else G0
    log: list[float] = []
    ratios: list[float] = []
    streak = 0
    for it in range(1, tol.max_iter + 1):
        G_new = step(ctx, v, G)
        res = (G_new - G).norm
        scale = max(G_new.norm, 1e-300)
        floor = 1e3 * np.finfo(float).eps * scale
        if log and log[-1] > floor:
            ratio = res / log[-1]
            ratios.append(ratio)
            streak = streak + 1 if ratio > tol.contraction_max else 0
            if streak >= 3:
                raise BoundViolation("picard_contraction",
                                     f"residual ratio {ratio:.3g} > {tol.contraction_max} "
                                     f"for 3 consecutive steps")
        log.append(res)
        G = G_new
        if res == 0.0 or res < tol.fp_tol * 1e-3 or (res < tol.fp_tol and len(log) > 1
                                                        and res >= 0.5 * log[-2]):
            break
    else:
        if log[-1] >= tol.fp_tol:
            raise UnconvergedError(f"Picard iteration did not reach fp_tol in {tol.max_iter} steps",
                                   log)
    if require_radius and G.norm > ctx.H1 * (1 + 1e-9):
        raise BoundViolation("H1", f"||Gamma||={G.norm:.6g} exceeds H1={ctx.H1:.6g}")
    gn = G.norm
    remainder = ctx.remainder_factor * gn * ctx.h(gn)
    return FixedPoint(G, log[-1], it, log, ratios, float(remainder))


def solve_stable(ctx: PerronContext, v, G0: WeightedSequence | None = None,
                 require_radius: bool = True) -> FixedPoint:
    """Picard iteration for the stable operator, started from zero unless G0 is given."""
    if ctx.kind != "stable":
        raise ValueError("context is not a stable one")
    return _solve(ctx, v, G0, require_radius)


def solve_unstable(ctx: PerronContext, u, G0: WeightedSequence | None = None,
                   require_radius: bool = True) -> FixedPoint:
    """Picard iteration for the unstable operator, started from zero unless G0 is given."""
    if ctx.kind != "unstable":
        raise ValueError("context is not an unstable one")
    return _solve(ctx, u, G0, require_radius)


def _forward_orbit(ctx: PerronContext, Z: np.ndarray, n: int, start: int = 0) -> list[np.ndarray]:
    """phi^j(Z) - Y at offsets start..start+n (forward orbit in the base)."""
    out = []
    q = shift(ctx.base_point, start)
    x = np.array(Z, dtype=float)
    for j in range(n + 1):
        out.append(x - ctx.nc.stationary(shift(q, j)))
        if j < n:
            x = ctx.nc(shift(q, j), x)
    return out


def fixed_point_orbit_check(ctx: PerronContext, v, G: WeightedSequence,
                            n_check: int = 30) -> dict:
    """Compare a fixed point with the true orbit through Y + xi.

    Stable side: xi = v - sum_j (psi^{j+1})^{-1} Pi_U P_j(Gamma_j), evaluated by
    direct products, then phi^j(Y + xi) - Y is compared with Gamma_j.
    Unstable side: phi^k(Y + Gamma_n) - Y at offset -(n-k) is compared with
    Gamma_{n-k}. The absolute discrepancy is the pass criterion; the relative
    one is reported because roundoff grows along expanding directions.
    """
    N = ctx.N
    n_check = min(int(n_check), N)
    if ctx.kind == "stable":
        xi = ctx.param_basis @ ctx.parameter_coords(v)
        if ctx.U[0].shape[1]:
            P = _residuals(ctx, G)
            Minv = np.eye(ctx.U[0].shape[1])
            for j in range(N + 1):
                Minv = Minv @ np.linalg.inv(ctx.CU[j])
                _, uj = ctx.split(j + 1, P[j])
                xi = xi - ctx.U[0] @ (Minv @ uj)
        orbit = _forward_orbit(ctx, ctx.stationary(0) + xi, n_check)
        abs_err = [float(np.linalg.norm(orbit[j] - G.entries[j])) for j in range(n_check + 1)]
        rel_err = [e / max(float(np.linalg.norm(G.entries[j])), 1e-300)
                   for j, e in enumerate(abs_err)]
        start_err = float(np.linalg.norm(xi - G.entries[0]))
    else:
        abs_err, rel_err = [0.0], [0.0]
        for n in range(1, n_check + 1):
            Zn = ctx.stationary(n) + G.entries[n]
            x = Zn
            for k in range(1, n + 1):
                x = ctx.nc(ctx.point(n - k + 1), x)
            err = float(np.linalg.norm(x - ctx.stationary(0) - G.entries[0]))
            # one step: phi at sigma^n maps Gamma_n to Gamma_{n-1}
            one = ctx.nc(ctx.point(n), Zn) - ctx.stationary(n - 1) - G.entries[n - 1]
            e1 = float(np.linalg.norm(one))
            abs_err.append(max(err, e1))
            rel_err.append(e1 / max(float(np.linalg.norm(G.entries[n - 1])), 1e-300))
        start_err = 0.0
    return {"max_abs": float(max(abs_err)), "max_rel": float(max(rel_err)),
            "abs": abs_err, "rel": rel_err, "start": start_err, "n_check": n_check}


@dataclass(eq=False)
class ManifoldChart:
    """Points Z = Y + Pi^0 Gamma(v) for a grid of parameters v."""

    base_point: BasePoint
    kind: str
    upsilon: float
    parameters: np.ndarray
    points: np.ndarray
    residuals: np.ndarray
    decay_rates: np.ndarray
    weighted_sups: np.ndarray
    remainder_bounds: np.ndarray
    checks: dict = field(default_factory=dict)
    context: PerronContext | None = field(default=None, repr=False)
    fixed_points: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "upsilon": self.upsilon,
            "base_point": {"seed": self.base_point.seed, "time": self.base_point.time},
            "parameters": self.parameters.tolist(),
            "points": self.points.tolist(),
            "residuals": self.residuals.tolist(),
            "decay_rates": [None if not math.isfinite(x) else float(x) for x in self.decay_rates],
            "weighted_sups": self.weighted_sups.tolist(),
            "remainder_bounds": self.remainder_bounds.tolist(),
            "checks": self.checks,
        }


def _decay_rate_stable(ctx: PerronContext, Z: np.ndarray) -> tuple[float, float]:
    n = min(ctx.N, _FIT_HORIZON)
    orbit = _forward_orbit(ctx, Z, n)
    norms = np.array([fiber_norm(x, ctx.norm_at(j)) for j, x in enumerate(orbit)])
    wsup = float(np.max(np.exp(ctx.upsilon * np.arange(len(norms))) * norms))
    if norms[0] == 0.0:
        return -math.inf, wsup
    rate = fit_log_slope([(j, norms[j]) for j in range(n + 1)])
    return rate, wsup


def _chart(ctx: PerronContext, grid: Sequence, solve) -> ManifoldChart:
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    d = ctx.S[0].shape[0]
    if grid.shape[1] != d:
        # coordinates in the parameter basis
        if grid.shape[1] != ctx.param_dim:
            raise ValueError(f"parameters must have {d} entries (or {ctx.param_dim} coordinates)")
        grid = grid @ ctx.param_basis.T
    pts, res, rates, wsups, rems, fps = [], [], [], [], [], []
    Y = ctx.stationary(0)
    for v in grid:
        fp = solve(ctx, v)
        Z = Y + fp.point_offset
        if ctx.kind == "stable":
            rate, wsup = _decay_rate_stable(ctx, Z)
        else:
            norms = fp.sequence.entry_norms()
            wsup = fp.sequence.norm
            n = min(ctx.N, _FIT_HORIZON)
            rate = (-math.inf if norms[0] == 0 else
                    fit_log_slope([(j, norms[j]) for j in range(n + 1)]))
        pts.append(Z)
        res.append(fp.residual)
        rates.append(rate)
        wsups.append(wsup)
        rems.append(fp.remainder_bound)
        fps.append(fp)
    return ManifoldChart(ctx.base_point, ctx.kind, ctx.upsilon, grid, np.array(pts),
                         np.array(res), np.array(rates), np.array(wsups), np.array(rems),
                         {}, ctx, fps)


def stable_chart(ctx: PerronContext, grid: Sequence) -> ManifoldChart:
    """Chart of the local stable manifold over a parameter grid inside the ball of radius R.

    Decay rates are fitted over the first min(N, 20) steps of the forward
    orbit; beyond that, roundoff along the expanding directions dominates.
    """
    chart = _chart(ctx, grid, solve_stable)
    mu = ctx.spectrum.mu[ctx.level - 1]
    finite = chart.decay_rates[np.isfinite(chart.decay_rates)]
    chart.checks["decay"] = {"bound": mu + 0.05,
                             "max_rate": float(finite.max()) if finite.size else None,
                             "ok": bool(np.all(finite <= mu + 0.05))}
    return chart


def unstable_chart(ctx: PerronContext, grid: Sequence, recompose_tol: float = 1e-8) -> ManifoldChart:
    """Chart of the local unstable manifold, with backward orbits and their re-composition."""
    chart = _chart(ctx, grid, solve_unstable)
    mu = ctx.spectrum.mu[ctx.level - 1]
    finite = chart.decay_rates[np.isfinite(chart.decay_rates)]
    chart.checks["decay"] = {"bound": -mu + 0.05,
                             "max_rate": float(finite.max()) if finite.size else None,
                             "ok": bool(np.all(finite <= -mu + 0.05))}
    worst = 0.0
    for fp in chart.fixed_points:
        worst = max(worst, fixed_point_orbit_check(ctx, None, fp.sequence)["max_abs"])
    chart.checks["recomposition"] = {"max_abs": worst, "ok": bool(worst <= recompose_tol)}
    return chart


def chart_points(chart: ManifoldChart) -> np.ndarray:
    return chart.points


def _solver(ctx: PerronContext):
    return solve_stable if ctx.kind == "stable" else solve_unstable


def tangency_check(chart: ManifoldChart, scales: Sequence[float] | None = None) -> dict:
    """Central-difference secants of the chart at the stationary point, extrapolated to h -> 0.

    Returns the distance between the span of the secants and the parameter
    space (S on the stable side, U on the unstable side).
    """
    ctx = chart.context
    if ctx is None:
        raise ValueError("chart carries no context")
    solve = _solver(ctx)
    if scales is None:
        scales = (ctx.R * 0.1, ctx.R * 0.05)
    h_big, h_small = float(scales[0]), float(scales[1])
    B = ctx.param_basis
    cols = []
    for i in range(B.shape[1]):
        e = B[:, i] / max(fiber_norm(B[:, i], ctx.norm_at(0)), 1e-300)

        def secant(h):
            zp = solve(ctx, h * e).point_offset
            zm = solve(ctx, -h * e).point_offset
            return (zp - zm) / (2.0 * h)

        d1, d2 = secant(h_big), secant(h_small)
        q = (h_big / h_small) ** 2
        cols.append((q * d2 - d1) / (q - 1.0))
    T = np.column_stack(cols) if cols else np.zeros((B.shape[0], 0))
    fib = ctx.nc.fiber(ctx.base_point)
    if T.shape[1] == 0:
        return {"delta": 0.0, "tangent": T.tolist(), "ok": True}
    Ts = Subspace(fib, T, check=False)
    Ps = Subspace(fib, B, check=False)
    delta = float(grassmann_delta(Ts, Ps).value)
    return {"delta": delta, "tangent": T.tolist(), "ok": bool(delta <= 1e-4)}


def transversality_check(stable: ManifoldChart, unstable: ManifoldChart) -> dict:
    """Check E = T U_loc + T S_loc at the stationary point.

    Refused (NonHyperbolicError) when an exponent lies within group_gap of zero.
    """
    ctx_s, ctx_u = stable.context, unstable.context
    if ctx_s is None or ctx_u is None:
        raise ValueError("charts carry no context")
    gg = ctx_s.tolerances.group_gap
    for m in ctx_s.spectrum.mu:
        if math.isfinite(m) and abs(m) <= gg:
            raise NonHyperbolicError(f"exponent {m:.4g} within {gg} of zero: no transversality claim")
    Ts = np.array(tangency_check(stable)["tangent"]).reshape(ctx_s.S[0].shape[0], -1)
    Tu = np.array(tangency_check(unstable)["tangent"]).reshape(ctx_u.U[0].shape[0], -1)
    J = np.hstack([Ts, Tu])
    d = J.shape[0]
    vol = relative_volume(J) if J.shape[1] == d else 0.0
    fib = ctx_s.nc.fiber(ctx_s.base_point)
    pn = None
    if vol > ctx_s.tolerances.rank_tol:
        pn = projection_norm(Subspace(fib, Ts, check=False), Subspace(fib, Tu, check=False)).value
    return {"volume": float(vol), "dims": [Ts.shape[1], Tu.shape[1], d],
            "projection_norm": pn, "ok": bool(vol > ctx_s.tolerances.rank_tol)}


def membership(ctx: PerronContext, Z, tol: float = 1e-8) -> dict:
    """Membership of Z in the local manifold of the context.

    ``certified`` holds when the weighted orbit sup is below rho1 (the inner
    set of the sandwich), ``necessary`` when it is below rho2. ``in_chart``
    solves at the projected parameter and compares the chart point with Z.
    """
    Z = as_vector(Z, ctx.S[0].shape[0], "Z")
    Y = ctx.stationary(0)
    s, u = ctx.split(0, Z - Y)
    c = s if ctx.kind == "stable" else u
    v = ctx.param_basis @ c
    pnorm = fiber_norm(v, ctx.norm_at(0))
    out: dict[str, Any] = {"parameter": v.tolist(), "parameter_norm": pnorm, "R": ctx.R,
                           "rho1": ctx.rho1, "rho2": ctx.rho2}
    if ctx.kind == "stable":
        orbit = _forward_orbit(ctx, Z, min(ctx.N, _FIT_HORIZON))
        norms = np.array([fiber_norm(x, ctx.norm_at(j)) for j, x in enumerate(orbit)])
        wsup = float(np.max(np.exp(ctx.upsilon * np.arange(len(norms))) * norms))
        out["weighted_sup"] = wsup
        out["certified"] = bool(wsup < ctx.rho1)
        out["necessary"] = bool(wsup < ctx.rho2)
    if pnorm < ctx.R:
        fp = _solver(ctx)(ctx, v)
        disc = float(np.linalg.norm(Y + fp.point_offset - Z))
        out["discrepancy"] = disc
        out["in_chart"] = bool(disc <= tol)
        if ctx.kind == "unstable":
            out["weighted_sup"] = fp.sequence.norm
            out["necessary"] = bool(fp.sequence.norm < ctx.rho2)
    else:
        out["discrepancy"] = None
        out["in_chart"] = False
    return out


def invariance_check(ctx: PerronContext, chart: ManifoldChart, n_values: Sequence[int] | None = None,
                     N: int | None = None) -> dict:
    """Forward images of stable chart points tested for membership at theta^n p.

    The threshold is the first n with exp(-n upsilon) rho2(p) <= rho1(theta^n p),
    evaluated with contexts along the orbit.
    """
    if ctx.kind != "stable":
        raise ValueError("local invariance is checked on the stable side")
    N = ctx.N if N is None else N
    results = []
    threshold = None
    n_values = list(n_values) if n_values is not None else [1, 2, 4, 8]
    for n in n_values:
        q = shift(ctx.base_point, n)
        ctx_n = perron_context(ctx.nc, q, "stable", ctx.upsilon, N, ctx.spectrum, ctx.tolerances)
        meets = math.exp(-n * ctx.upsilon) * ctx.rho2 <= ctx_n.rho1
        if meets and threshold is None:
            threshold = n
        members = []
        for Z in chart.points:
            Zn = ctx.nc.iterate(ctx.base_point, Z, n)
            m = membership(ctx_n, Zn)
            members.append({"certified": m["certified"], "in_chart": m["in_chart"],
                            "weighted_sup": m["weighted_sup"], "discrepancy": m["discrepancy"]})
        results.append({"n": n, "past_threshold": bool(meets), "rho1": ctx_n.rho1,
                        "members": members})
    ok = all(all(m["certified"] and m["in_chart"] for m in r["members"])
             for r in results if r["past_threshold"])
    return {"threshold": threshold, "results": results, "ok": bool(ok)}


def pairwise_contraction(chart: ManifoldChart, n_fit: int | None = None) -> dict:
    """Fitted rate of sup ||phi^n Z - phi^n Z'|| / ||Z - Z'|| over chart point pairs."""
    ctx = chart.context
    if ctx is None or ctx.kind != "stable":
        raise ValueError("needs a stable chart with context")
    n = min(ctx.N, _FIT_HORIZON) if n_fit is None else int(n_fit)
    orbits = [_forward_orbit(ctx, Z, n) for Z in chart.points]
    sup = np.zeros(n + 1)
    P = len(orbits)
    for i in range(P):
        for k in range(i + 1, P):
            d0 = fiber_norm(orbits[i][0] - orbits[k][0], ctx.norm_at(0))
            if d0 == 0:
                continue
            for j in range(n + 1):
                sup[j] = max(sup[j], fiber_norm(orbits[i][j] - orbits[k][j], ctx.norm_at(j)) / d0)
    rate = fit_log_slope([(j, sup[j]) for j in range(n + 1)])
    mu = ctx.spectrum.mu[ctx.level - 1]
    return {"rate": rate, "bound": mu + 0.1, "ok": bool(rate <= mu + 0.1), "sup": sup.tolist()}


def parameter_lipschitz_check(ctx: PerronContext, params: Sequence, slack: float = 0.05) -> dict:
    """||Gamma(v) - Gamma(v')|| <= 2 h1 ||v - v'|| over parameter pairs."""
    solve = _solver(ctx)
    fps = [solve(ctx, v) for v in params]
    worst = 0.0
    for i in range(len(fps)):
        for k in range(i + 1, len(fps)):
            dv = fiber_norm(np.asarray(params[i], float) - np.asarray(params[k], float), ctx.norm_at(0))
            if dv == 0:
                continue
            worst = max(worst, (fps[i].sequence - fps[k].sequence).norm / dv)
    bound = 2.0 * ctx.h1 * (1.0 + slack)
    return {"max_ratio": worst, "bound": bound, "ok": bool(worst <= bound)}


def uniqueness_check(ctx: PerronContext, v, seed: int = 0) -> dict:
    """Solve from zero and from a random admissible start; the fixed points must agree."""
    solve = _solver(ctx)
    a = solve(ctx, v)
    rng = np.random.default_rng(seed)
    entries = []
    for n in range(ctx.N + 1):
        x = rng.standard_normal(ctx.S[n].shape[0])
        x *= 0.5 * ctx.H1 * math.exp(-ctx.upsilon * n) / max(fiber_norm(x, ctx.norm_at(n)), 1e-300)
        entries.append(x)
    G0 = WeightedSequence(ctx.base_point, ctx.direction, ctx.upsilon, tuple(entries),
                          tuple(ctx.norm_at(n) for n in range(ctx.N + 1)))
    b = solve(ctx, v, G0)
    dist = (a.sequence - b.sequence).norm
    tol = 10 * ctx.tolerances.fp_tol
    return {"distance": dist, "tol": tol, "ok": bool(dist <= tol)}


def stable_growth_sampler(nc: NonlinearCocycle, p: BasePoint, spectrum: LyapunovSpectrum,
                          epsilon: float, n: int, P: int = 40):
    """Function q -> sup_{0<=k<=P} exp(-k(mu_j0 + epsilon)) ||psi^k restricted to S_q||.

    Valid for q = theta^t p with |t| <= n. The supremum is truncated at P steps.
    """
    neg = [i for i, mu in enumerate(spectrum.mu, 1) if mu < 0]
    if not neg:
        raise ValueError("no negative exponent: the stable space is trivial")
    level = neg[0]
    m = spectrum.codim(level)
    mu = spectrum.mu[level - 1]
    lin = nc.linearization() if isinstance(nc, NonlinearCocycle) else nc
    gap = spectrum.mu[level - 2] - mu if level >= 2 else math.inf
    frames = OrbitFrames(lin, p, [m] if m else [], -n, n + P,
                         burn_in_for(gap if math.isfinite(gap) else 1.0))
    ts = range(-n, n + P + 1)
    slow = [frames.slow(t, m) for t in ts]
    C = np.array([frames.restricted(t, slow[i], slow[i + 1]) for i, t in enumerate(ts[:-1])])
    k_dim = slow[0].shape[1]
    T = 2 * n + 1
    M = np.broadcast_to(np.eye(k_dim), (T, k_dim, k_dim)).copy()
    best = np.ones(T)
    for k in range(1, P + 1):
        M = C[k - 1:k - 1 + T] @ M
        scale = np.linalg.norm(M, 2, axis=(1, 2)) if k_dim else np.zeros(T)
        best = np.maximum(best, math.exp(-k * (mu + epsilon)) * scale)
    values = {t: float(b) for t, b in zip(range(-n, n + 1), best)}

    def sample(q: BasePoint) -> float:
        t = q.time - p.time
        if t not in values:
            raise ValueError("base point outside the sampled window")
        return values[t]

    return sample
