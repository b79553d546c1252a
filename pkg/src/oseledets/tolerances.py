"""Numerical tolerances, collected in one immutable value."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping


@dataclass(frozen=True)
class ToleranceConfig:
    """Every threshold used by the library.

    Attributes:
        rank_tol: Relative volume below which a basis counts as dependent.
        group_gap: Exponents closer than this (nats) are merged into one level.
        infinity_cut: Growth rates below this value are reported as ``-inf``.
        fail_threshold: Tail residual above which a growth series is undecided.
        gap_min: Minimal per-step log gap between singular values at a level split.
        d_H_tol: Convergence threshold for push-forward iterates.
        n_cap: Largest push-forward length tried.
        stride: Distance between compared push-forward iterates.
        fp_tol: Picard residual threshold in the weighted norm.
        max_iter: Picard iteration budget.
        contraction_max: Largest accepted ratio of successive Picard residuals.
        n_starts: Number of starts for heuristic sphere searches.
        horizon: Truncation length of sequences and suprema.
        temper_tol: Largest log-slope magnitude still called tempered.
    """

    rank_tol: float = 1e-9
    group_gap: float = 0.1
    infinity_cut: float = -30.0
    fail_threshold: float = 0.25
    gap_min: float = 0.02
    d_H_tol: float = 1e-7
    n_cap: int = 500
    stride: int = 5
    fp_tol: float = 1e-10
    max_iter: int = 200
    contraction_max: float = 0.55
    n_starts: int = 64
    horizon: int = 40
    temper_tol: float = 0.05

    def with_overrides(self, overrides: Mapping[str, Any] | None) -> "ToleranceConfig":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ValueError(f"unknown tolerance keys: {', '.join(unknown)}")
        return replace(self, **dict(overrides))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


DEFAULT_TOLERANCES = ToleranceConfig()
