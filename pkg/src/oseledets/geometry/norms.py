"""Norms on finite-dimensional fibers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Mapping, NamedTuple

import numpy as np

from .._validation import as_vector

_KINDS = ("L2", "L1", "Linf", "WeightedSup")


class Estimate(NamedTuple):
    """A computed supremum together with whether it is exact.

    ``exact=False`` marks multi-start lower bounds.
    """

    value: float
    exact: bool

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class NormSpec:
    """Choice of norm on a coordinate space."""

    kind: str = "L2"
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "WeightedSup":
            if self.weights is None or len(self.weights) == 0:
                raise ValueError("WeightedSup needs weights")
            w = tuple(float(x) for x in self.weights)
            if not all(np.isfinite(x) and x > 0 for x in w):
                raise ValueError("weights must be strictly positive and finite")
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise ValueError(f"{self.kind} takes no weights")

    @property
    def is_l2(self) -> bool:
        return self.kind == "L2"

    @property
    def polyhedral(self) -> bool:
        return self.kind != "L2"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out

    @classmethod
    def from_dict(cls, spec: Mapping[str, Any] | str) -> "NormSpec":
        if isinstance(spec, str):
            return cls(spec)
        w = spec.get("weights")
        return cls(spec.get("kind", "L2"), None if w is None else tuple(w))


L2 = NormSpec("L2")


@dataclass(frozen=True)
class Fiber:
    """A normed coordinate space R^dim."""

    dim: int
    norm: NormSpec = L2

    def __post_init__(self) -> None:
        if int(self.dim) < 1:
            raise ValueError(f"fiber dimension must be >= 1, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.norm.kind == "WeightedSup" and len(self.norm.weights) != self.dim:
            raise ValueError("weight count does not match fiber dimension")


def fiber_norm(x, n: NormSpec, dim: int | None = None) -> float:
    """Norm of ``x``; closed forms for every shipped kind."""
    x = as_vector(x, dim)
    if n.kind == "L2":
        return float(np.linalg.norm(x))
    if n.kind == "L1":
        return float(np.abs(x).sum())
    if n.kind == "Linf":
        return float(np.abs(x).max(initial=0.0))
    w = np.asarray(n.weights)
    if w.shape[0] != x.shape[0]:
        raise ValueError("weight count does not match vector length")
    return float((w * np.abs(x)).max(initial=0.0))


def column_norms(X: np.ndarray, n: NormSpec) -> np.ndarray:
    """Fiber norms of the columns of ``X``."""
    X = np.asarray(X, dtype=float)
    if n.kind == "L2":
        return np.linalg.norm(X, axis=0)
    if n.kind == "L1":
        return np.abs(X).sum(axis=0)
    if n.kind == "Linf":
        return np.abs(X).max(axis=0, initial=0.0)
    return (np.asarray(n.weights)[:, None] * np.abs(X)).max(axis=0, initial=0.0)


def dual_norm(n: NormSpec) -> NormSpec:
    """Dual norm for the kinds whose dual is again a shipped kind."""
    if n.kind == "L2":
        return n
    if n.kind == "L1":
        return NormSpec("Linf")
    if n.kind == "Linf":
        return NormSpec("L1")
    raise ValueError("the dual of a weighted sup norm is a weighted L1 norm, which is not shipped")


def unit_ball_vertices(n: NormSpec, dim: int) -> np.ndarray | None:
    """Vertices of the unit ball as columns, or None when it is not a polytope.

    Only the half with a positive leading nonzero entry is returned; the other
    half is its negative, which gives the same values for even functions.
    """
    if n.kind == "L2":
        return None
    if n.kind == "L1":
        return np.eye(dim)
    signs = np.array([(1.0,) + s for s in itertools.product((1.0, -1.0), repeat=dim - 1)]).T
    if n.kind == "Linf":
        return signs
    return signs / np.asarray(n.weights)[:, None]
