"""Catalog of benchmark cocycles.

Every builtin draws its randomness from the base point alone, using a fixed
channel per role, so a system is fully determined by its parameters and the
base point it is evaluated at.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Mapping

import numpy as np

from .base import BasePoint, draws, normals
from .cocycle import FieldSpec, LinearCocycle, NonlinearCocycle, Nonlinearity
from .geometry import L2, NormSpec

__all__ = ["builtin", "CATALOG", "LINEAR_BUILTINS", "NONLINEAR_BUILTINS", "default_params"]


def _norm(params: Mapping[str, Any]) -> NormSpec:
    spec = params.get("norm")
    return L2 if spec is None else NormSpec.from_dict(spec)


def _constant_matrix(params):
    A = np.array(params.get("matrix", [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]]), dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError("constant_matrix needs a non-empty square matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    A.setflags(write=False)
    meta = {}
    try:
        ev = np.linalg.eigvals(A)
        with np.errstate(divide="ignore"):
            meta["exponents"] = sorted(np.log(np.abs(ev)).tolist(), reverse=True)
    except np.linalg.LinAlgError:  # pragma: no cover
        pass
    return LinearCocycle(FieldSpec.constant(A.shape[0], _norm(params)), lambda p: A, meta)


def _diag_law(params, d_default: int):
    """Log-diagonal sampler and its expected values, from either law description."""
    if "choices" in params:
        choices = [np.asarray(c, dtype=float) for c in params["choices"]]
        if not choices or any(c.ndim != 1 or c.size == 0 or np.any(c <= 0) for c in choices):
            raise ValueError("choices must be non-empty lists of positive reals")
        logs = [np.log(c) for c in choices]

        def sample(p: BasePoint, channel: int) -> np.ndarray:
            u = draws(p, channel, len(logs))
            return np.array([lc[min(int(ui * lc.size), lc.size - 1)] for lc, ui in zip(logs, u)])

        return sample, [float(lc.mean()) for lc in logs]
    mean = np.asarray(params.get("log_mean", [0.5, 0.0, -0.5][:d_default]), dtype=float)
    if "log_spread" in params:
        spread = np.broadcast_to(np.asarray(params["log_spread"], dtype=float), mean.shape)

        def sample(p: BasePoint, channel: int) -> np.ndarray:
            return mean + spread * (2.0 * draws(p, channel, mean.size) - 1.0)
    else:
        sd = np.broadcast_to(np.asarray(params.get("log_sd", 0.25), dtype=float), mean.shape)

        def sample(p: BasePoint, channel: int) -> np.ndarray:
            return mean + sd * normals(p, channel, mean.size)

    return sample, mean.tolist()


def _random_diagonal(params):
    sample, expected = _diag_law(params, 3)
    d = len(expected)
    return LinearCocycle(FieldSpec.constant(d, _norm(params)),
                         lambda p: np.diag(np.exp(sample(p, 0))),
                         {"exponents": sorted(expected, reverse=True)})


def _random_triangular(params):
    params = dict(params)
    if "choices" not in params:
        params.setdefault("log_mean", [0.5 * math.log(2.0), -0.5 * math.log(2.0)])
        if "log_sd" not in params:
            params.setdefault("log_spread", 0.1)
    sample, expected = _diag_law(params, 2)
    d = len(expected)
    off = float(params.get("offdiag", 1.0))
    iu = np.triu_indices(d, 1)

    def matrix(p: BasePoint) -> np.ndarray:
        A = np.diag(np.exp(sample(p, 0)))
        A[iu] = off * (2.0 * draws(p, 1, len(iu[0])) - 1.0)
        return A

    return LinearCocycle(FieldSpec.constant(d, _norm(params)), matrix,
                         {"exponents": sorted(expected, reverse=True)})


def _rotation_scaling(params):
    s1, s2 = (float(x) for x in params.get("scales", [1.5, 0.5]))
    if s1 <= 0 or s2 <= 0:
        raise ValueError("scales must be positive")
    spread = float(params.get("angle_spread", 1.0))
    S = np.diag([s1, s2])

    def matrix(p: BasePoint) -> np.ndarray:
        a = 2.0 * math.pi * spread * draws(p, 0, 1)[0]
        c, s = math.cos(a), math.sin(a)
        return S @ np.array([[c, -s], [s, c]])

    meta = {}
    if spread == 1.0:
        # uniform angle: E log|diag(s) u| = log((s1 + s2) / 2), total = log(s1 s2)
        top = math.log(0.5 * (s1 + s2))
        meta["exponents"] = [top, math.log(s1 * s2) - top]
    return LinearCocycle(FieldSpec.constant(2, _norm(params)), matrix, meta)


def _varying_dimension(params):
    d1 = int(params.get("d1", 3))
    d2 = int(params.get("d2", 2))
    if d1 < 1 or d2 < 1:
        raise ValueError("dimensions must be positive")
    scales = np.asarray(params.get("scales", [1.5, 1.0, 0.5, 0.25][:max(d1, d2)]), dtype=float)
    if scales.size < max(d1, d2):
        raise ValueError("need one scale per coordinate of the larger fiber")
    noise = float(params.get("noise", 0.1))
    D = np.diag(scales)

    def dim(p: BasePoint) -> int:
        return d1 if p.time % 2 == 0 else d2

    def matrix(p: BasePoint) -> np.ndarray:
        din, dout = dim(p), (d2 if p.time % 2 == 0 else d1)
        return D[:dout, :din] + noise * normals(p, 0, dout * din).reshape(dout, din)

    return LinearCocycle(FieldSpec(dim, lambda p: _norm(params)), matrix,
                         {"dims": [d1, d2]})


def _discretized_delay(params):
    tau = int(params.get("tau", 2))
    if tau < 1:
        raise ValueError("tau must be >= 1")
    A0 = np.atleast_2d(np.asarray(params.get("a", 1.5), dtype=float))
    B0 = np.atleast_2d(np.asarray(params.get("b", -0.25), dtype=float))
    if A0.shape != B0.shape or A0.shape[0] != A0.shape[1]:
        raise ValueError("a and b must be scalars or square matrices of equal size")
    noise = float(params.get("noise", 0.05))
    m = A0.shape[0]
    d = m * (tau + 1)

    def matrix(p: BasePoint) -> np.ndarray:
        u = 2.0 * draws(p, 0, 2 * m * m) - 1.0
        M = np.zeros((d, d))
        M[:m, :m] = A0 + noise * u[: m * m].reshape(m, m)
        M[:m, d - m:] = B0 + noise * u[m * m:].reshape(m, m)
        M[m:, :d - m] = np.eye(d - m)
        return M

    return LinearCocycle(FieldSpec.constant(d, _norm(params)), matrix, {"tau": tau})


def _saddle(a_fn: Callable[[BasePoint], float], b_fn: Callable[[BasePoint], float],
            coupling: float, norm: NormSpec, meta: dict) -> NonlinearCocycle:
    c = float(coupling)

    def map_fn(p: BasePoint, x: np.ndarray) -> np.ndarray:
        return np.array([a_fn(p) * x[0], b_fn(p) * x[1] + c * x[0] ** 2])

    def derivative_fn(p: BasePoint, x: np.ndarray) -> np.ndarray:
        return np.array([[a_fn(p), 0.0], [2.0 * c * x[0], b_fn(p)]])

    # P(xi) = (0, c xi_x^2) gives |P(xi) - P(eta)| <= |c| |xi - eta| (|xi| + |eta|)
    nl = Nonlinearity(r=1.0, g=lambda x: 1.0, f_fn=lambda p: max(abs(c), 1e-300),
                      rho_fn=lambda p: 1.0)
    return NonlinearCocycle(FieldSpec.constant(2, norm), map_fn, derivative_fn,
                            lambda p: np.zeros(2), nl, meta)


def _quadratic_saddle(params):
    am = float(params.get("a_log_mean", math.log(0.5)))
    asp = float(params.get("a_log_spread", 0.1))
    bm = float(params.get("b_log_mean", math.log(2.0)))
    bsp = float(params.get("b_log_spread", 0.1))

    def a_fn(p: BasePoint) -> float:
        return math.exp(am + asp * (2.0 * draws(p, 0, 2)[0] - 1.0))

    def b_fn(p: BasePoint) -> float:
        return math.exp(bm + bsp * (2.0 * draws(p, 0, 2)[1] - 1.0))

    return _saddle(a_fn, b_fn, params.get("coupling", 1.0), _norm(params),
                   {"exponents": sorted([am, bm], reverse=True)})


def _deterministic_saddle(params):
    a = float(params.get("a", 0.5))
    b = float(params.get("b", 2.0))
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    return _saddle(lambda p: a, lambda p: b, params.get("coupling", 1.0), _norm(params),
                   {"exponents": sorted([math.log(a), math.log(b)], reverse=True)})


CATALOG: dict[str, Callable[[Mapping[str, Any]], Any]] = {
    "constant_matrix": _constant_matrix,
    "random_diagonal": _random_diagonal,
    "random_triangular": _random_triangular,
    "rotation_scaling": _rotation_scaling,
    "varying_dimension": _varying_dimension,
    "discretized_delay": _discretized_delay,
    "quadratic_saddle": _quadratic_saddle,
    "deterministic_saddle": _deterministic_saddle,
}

LINEAR_BUILTINS = ("constant_matrix", "random_diagonal", "random_triangular",
                   "rotation_scaling", "varying_dimension", "discretized_delay")
NONLINEAR_BUILTINS = ("quadratic_saddle", "deterministic_saddle")


ALLOWED_PARAMS: dict[str, frozenset] = {
    "constant_matrix": frozenset({"matrix", "norm"}),
    "random_diagonal": frozenset({"log_mean", "log_sd", "log_spread", "choices", "norm"}),
    "random_triangular": frozenset({"log_mean", "log_sd", "log_spread", "choices", "offdiag", "norm"}),
    "rotation_scaling": frozenset({"scales", "angle_spread", "norm"}),
    "varying_dimension": frozenset({"d1", "d2", "scales", "noise", "norm"}),
    "discretized_delay": frozenset({"a", "b", "tau", "noise", "norm"}),
    "quadratic_saddle": frozenset({"a_log_mean", "a_log_spread", "b_log_mean", "b_log_spread",
                                   "coupling", "norm"}),
    "deterministic_saddle": frozenset({"a", "b", "coupling", "norm"}),
}


def default_params(name: str) -> dict:
    """Parameters used when none are given (the empty dict)."""
    if name not in CATALOG:
        raise ValueError(f"unknown builtin {name!r}")
    return {}


def builtin(name: str, params: Mapping[str, Any] | None = None):
    """Construct a builtin system by name."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown builtin {name!r}; known: {', '.join(sorted(CATALOG))}") from None
    params = dict(params or {})
    unknown = sorted(set(params) - ALLOWED_PARAMS[name])
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {', '.join(unknown)}")
    try:
        system = factory(params)
    except (TypeError, KeyError) as exc:
        raise ValueError(f"invalid parameters for {name}: {exc}") from exc
    system.meta.setdefault("name", name)
    return system
