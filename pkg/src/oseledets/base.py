"""Invertible ergodic base systems with exact replay.

A base point is a value ``(system, seed, time, phase)``. The shift ``theta``
adds one to the time and ``sigma`` subtracts one, so ``theta`` and ``sigma``
are exact inverses for every integer time, positive or negative. Randomness
attached to a point comes from a counter-based generator keyed by the seed
and addressed by ``(time, channel)``; it never depends on traversal order.

For the rotation kind the circle coordinate is held as a 64-bit fixed-point
integer so that forward and backward steps cancel bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Mapping

import numpy as np
from scipy.special import ndtri

__all__ = [
    "BaseSystem",
    "BasePoint",
    "theta",
    "sigma",
    "shift",
    "draw",
    "draws",
    "normals",
    "symbol",
]

_log = logging.getLogger(__name__)

_MASK = (1 << 64) - 1
_ONE = float(1 << 64)
_KINDS = ("iid_shift", "rotation")


def _to_phase(x: float) -> int:
    return int(round((float(x) % 1.0) * _ONE)) & _MASK


@dataclass(frozen=True)
class BaseSystem:
    """An ergodic invertible driver.

    ``iid_shift`` is the two-sided Bernoulli shift; each time slot carries
    fresh uniforms, optionally mapped to a finite ``alphabet``. ``rotation``
    is the circle rotation by an irrational angle ``alpha``.
    """

    kind: str = "iid_shift"
    alpha: float | None = None
    alphabet: tuple | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown base kind {self.kind!r}; expected one of {_KINDS}")
        if self.alphabet is not None:
            object.__setattr__(self, "alphabet", tuple(self.alphabet))
            if len(self.alphabet) == 0:
                raise ValueError("alphabet must be non-empty")
        if self.kind == "rotation":
            if self.alpha is None:
                raise ValueError("rotation needs an angle alpha")
            a = float(self.alpha) % 1.0
            near = Fraction(a).limit_denominator(1000)
            if abs(a - float(near)) < 1e-9:
                _log.warning("alpha=%r is close to a rational with small denominator; "
                             "the rotation is then not ergodic", self.alpha)
            object.__setattr__(self, "alpha", a)
        elif self.alpha is not None:
            raise ValueError("alpha only applies to the rotation kind")

    @property
    def system_id(self) -> str:
        if self.kind == "rotation":
            return f"rotation:{self.alpha!r}"
        return "iid_shift"

    @property
    def _step(self) -> int:
        return _to_phase(self.alpha) if self.kind == "rotation" else 0

    def point(self, seed: int = 0, time: int = 0, aux: float | None = None) -> "BasePoint":
        """Base point at ``time``. For rotations ``aux`` is the circle coordinate at that time."""
        seed = int(seed) & _MASK
        phase = 0
        if self.kind == "rotation":
            if aux is None:
                aux = draws_from_key(seed, 0, 0, 1)[0]
            phase = _to_phase(aux)
        elif aux is not None:
            raise ValueError("aux only applies to the rotation kind")
        return BasePoint(self, seed, int(time), phase)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.alphabet is not None:
            out["alphabet"] = list(self.alphabet)
        return out

    @classmethod
    def from_dict(cls, spec: Mapping[str, Any]) -> "BaseSystem":
        return cls(kind=spec.get("kind", "iid_shift"), alpha=spec.get("alpha"),
                   alphabet=spec.get("alphabet"))


@dataclass(frozen=True)
class BasePoint:
    """A point of the base space, compared field by field."""

    system: BaseSystem = field(repr=False)
    seed: int
    time: int
    phase: int = 0

    @property
    def system_id(self) -> str:
        return self.system.system_id

    @property
    def aux(self) -> float | None:
        if self.system.kind == "rotation":
            return self.phase / _ONE
        return None

    def __repr__(self) -> str:
        extra = f", aux={self.aux!r}" if self.aux is not None else ""
        return f"BasePoint({self.system_id}, seed={self.seed}, time={self.time}{extra})"


def shift(p: BasePoint, n: int) -> BasePoint:
    """theta^n(p) for any integer n (negative n means sigma^|n|)."""
    n = int(n)
    phase = (p.phase + n * p.system._step) & _MASK
    return BasePoint(p.system, p.seed, p.time + n, phase)


def theta(p: BasePoint) -> BasePoint:
    return shift(p, 1)


def sigma(p: BasePoint) -> BasePoint:
    return shift(p, -1)


@lru_cache(maxsize=1 << 16)
def draws_from_key(key: int, slot: int, channel: int, size: int) -> tuple[float, ...]:
    counter = np.array([slot & _MASK, channel & _MASK, 0, 0], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
    return tuple(gen.random(size).tolist())


def _key_slot(p: BasePoint) -> tuple[int, int]:
    if p.system.kind == "rotation":
        # randomness is a function of the circle coordinate only
        return p.phase, 0
    return p.seed, p.time


def draws(p: BasePoint, channel: int, size: int) -> np.ndarray:
    """``size`` uniforms in [0, 1) attached to ``(p, channel)``."""
    key, slot = _key_slot(p)
    return np.array(draws_from_key(key, slot, int(channel), int(size)))


def draw(p: BasePoint, channel: int = 0) -> float:
    """One uniform in [0, 1), a pure function of the point and the channel."""
    key, slot = _key_slot(p)
    return draws_from_key(key, slot, int(channel), 1)[0]


def normals(p: BasePoint, channel: int, size: int) -> np.ndarray:
    """Standard normal variates obtained by inverting the normal CDF."""
    u = draws(p, channel, size)
    return ndtri(np.clip(u, 1e-300, None))


def symbol(p: BasePoint, channel: int = 0):
    """Symbol of the point's alphabet, chosen uniformly by ``draw``."""
    alphabet = p.system.alphabet
    if alphabet is None:
        raise ValueError("base system has no alphabet")
    return alphabet[min(int(draw(p, channel) * len(alphabet)), len(alphabet) - 1)]
