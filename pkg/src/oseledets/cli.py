"""Command line runner.

    oseledets <analysis> --config exp.json --out results/ [--workers N] [--seed S]

Writes ``report.json`` (deterministic), ``timing.json`` (wall clock),
``resolved_config.json`` and CSV plot data to the output directory.

Exit codes: 0 all checks passed, 2 unconverged, 3 bound violated,
64 configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .base import BaseSystem, BasePoint
from .builtins import builtin
from .cocycle import LinearCocycle, NonlinearCocycle
from .exceptions import (BoundViolation, ConfigError, NonHyperbolicError, UnconvergedError,
                         UnresolvedLevelError)
from .manifolds import (ManifoldChart, fixed_point_orbit_check, pairwise_contraction,
                        parameter_lipschitz_check, perron_context, stable_chart,
                        tangency_check, transversality_check, uniqueness_check, unstable_chart)
from .spectrum import estimate_exponents, growth_series_all, temperedness_check
from .splitting import (oseledets_splitting, projection_norm_sampler, verify_equivariance,
                        verify_rates, verify_volume_sums)
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

_log = logging.getLogger(__name__)

EXIT_OK, EXIT_UNCONVERGED, EXIT_BOUND, EXIT_CONFIG = 0, 2, 3, 64
ANALYSES = ("spectrum", "splitting", "stable", "unstable", "validate")

DEFAULTS: dict[str, Any] = {
    "schema_version": 1,
    "base": {"kind": "iid_shift", "alpha": None, "alphabet": None, "seed": 0, "time": 0,
             "aux": None},
    "system": {"params": {}},
    "horizons": {"n_max": 2000, "N": 40, "k_max": None, "levels": None, "n_check": 500},
    "manifold": {"upsilon": 0.3, "grid": None,
                 "grid_fractions": [-0.9, -0.5, -0.25, 0.25, 0.5, 0.9]},
    "output": {"report": "report.json", "csv": True},
}


def load_schema() -> dict:
    text = resources.files("oseledets").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_config(text: str, source: str = "<config>") -> dict:
    """Validate a JSON config strictly and return it with every default filled in."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    errors = sorted(Draft202012Validator(load_schema()).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(x) for x in e.path) or "<root>"
        raise ConfigError(f"{source}: at {where}: {e.message}")
    cfg = _merge(DEFAULTS, raw)
    cfg["tolerances"] = DEFAULT_TOLERANCES.with_overrides(raw.get("tolerances", {})).to_dict()
    try:
        builtin(cfg["system"]["name"], cfg["system"]["params"])
        BaseSystem.from_dict(cfg["base"])
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def _clean(x):
    """JSON-safe copy: numpy to builtins, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items() if not str(k).startswith("_")}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


class Run:
    """State of one CLI invocation."""

    def __init__(self, cfg: dict, workers: int = 1) -> None:
        self.cfg = cfg
        self.workers = max(1, int(workers))
        self.tol = ToleranceConfig(**cfg["tolerances"])
        base = BaseSystem.from_dict(cfg["base"])
        b = cfg["base"]
        self.point: BasePoint = base.point(b["seed"], b["time"], b["aux"])
        self.system = builtin(cfg["system"]["name"], cfg["system"]["params"])
        self.h = cfg["horizons"]
        self.checks: list[dict] = []
        self.csv: dict[str, tuple[list[str], list[list]]] = {}

    @property
    def linear(self) -> LinearCocycle:
        s = self.system
        return s.linearization() if isinstance(s, NonlinearCocycle) else s

    def map(self, fn: Callable, items: list) -> list:
        if self.workers == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.workers) as ex:
            return list(ex.map(fn, items))

    def check(self, name: str, ok: bool, hard: bool = True, **values) -> None:
        self.checks.append({"name": name, "ok": bool(ok), "hard": hard, **values})

    # analyses

    def spectrum(self, direction: str = "forward"):
        c = self.linear
        k_max = self.h["k_max"] or c.dim(self.point)
        series = growth_series_all(c, self.point, k_max, self.h["n_max"], direction)
        spec = estimate_exponents(series, self.tol)
        self.csv[f"series_{direction}.csv"] = (
            ["k", "n", "value_nats"],
            [[s.k, int(n), float(v)] for s in series for n, v in zip(s.n, s.values)])
        if spec.status != "ok":
            self.check("spectrum_settled", False, hard=False, direction=direction)
        return spec, series

    def levels(self, spec) -> int:
        if self.h["levels"] is not None:
            return min(self.h["levels"], spec.n_levels)
        return sum(1 for i in range(1, spec.n_levels) if spec.resolved(i, self.tol.group_gap))

    def splitting(self, spec):
        s = oseledets_splitting(self.linear, self.point, spec, self.levels(spec), self.tol)
        for i, st in enumerate(s.statuses, 1):
            self.check(f"splitting_level_{i}", st == "converged", hard=False, status=st,
                       uniqueness_distance=s.uniqueness[i - 1])
        return s

    def chart(self, kind: str, spec) -> tuple[Any, ManifoldChart]:
        m = self.cfg["manifold"]
        ctx = perron_context(self.system, self.point, kind, m["upsilon"], self.h["N"], spec, self.tol)
        if m["grid"] is not None:
            grid = np.asarray(m["grid"], dtype=float)
        else:
            B = ctx.param_basis
            grid = np.array([f * ctx.R * B[:, i] for i in range(B.shape[1])
                             for f in m["grid_fractions"]]).reshape(-1, B.shape[0])
        for v in grid:
            nv = ctx.parameter_norm(v)
            if nv >= ctx.R:
                raise BoundViolation("R", f"parameter norm {nv:.6g} is not below R={ctx.R:.6g}")
        build = stable_chart if kind == "stable" else unstable_chart
        parts = self.map(lambda v: build(ctx, [v]), list(grid))
        chart = _concat(parts, ctx, kind)
        head = [f"param_{i}" for i in range(grid.shape[1])] + \
               [f"x_{i}" for i in range(chart.points.shape[1] if len(chart.points) else grid.shape[1])]
        self.csv[f"{kind}_chart.csv"] = (head, [list(a) + list(b) for a, b in
                                               zip(chart.parameters, chart.points)])
        worst = max((r for fp in chart.fixed_points for r in fp.ratios), default=0.0)
        self.check(f"{kind}_picard_contraction", worst <= self.tol.contraction_max,
                   max_ratio=worst)
        self.check(f"{kind}_residuals", bool(np.all(chart.residuals <= self.tol.fp_tol)),
                   max_residual=float(chart.residuals.max(initial=0.0)))
        self.check(f"{kind}_decay", chart.checks["decay"]["ok"], **_values(chart.checks["decay"]))
        if "recomposition" in chart.checks:
            self.check("unstable_recomposition", chart.checks["recomposition"]["ok"],
                       **_values(chart.checks["recomposition"]))
        return ctx, chart


def _values(d: dict) -> dict:
    return {k: v for k, v in d.items() if k not in ("ok", "name", "hard")}


def _concat(parts: list[ManifoldChart], ctx, kind: str) -> ManifoldChart:
    if not parts:
        d = ctx.S[0].shape[0]
        return ManifoldChart(ctx.base_point, kind, ctx.upsilon, np.zeros((0, d)), np.zeros((0, d)),
                             np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), {}, ctx, [])
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
    checks = {}
    for key in parts[0].checks:
        entries = [p.checks[key] for p in parts]
        merged = dict(entries[0])
        merged["ok"] = all(e["ok"] for e in entries)
        for field_ in ("max_rate", "max_abs"):
            if field_ in merged:
                vals = [e[field_] for e in entries if e.get(field_) is not None]
                merged[field_] = max(vals) if vals else None
        checks[key] = merged
    return ManifoldChart(ctx.base_point, kind, ctx.upsilon, cat("parameters"), cat("points"),
                         cat("residuals"), cat("decay_rates"), cat("weighted_sups"),
                         cat("remainder_bounds"), checks, ctx,
                         [fp for p in parts for fp in p.fixed_points])


def _run_spectrum(run: Run) -> dict:
    spec, series = run.spectrum()
    return {"spectrum": spec.to_dict()}


def _run_splitting(run: Run) -> dict:
    spec, _ = run.spectrum()
    s = run.splitting(spec)
    return {"spectrum": spec.to_dict(), "splitting": s.to_dict()}


def _run_manifold(run: Run, kind: str) -> dict:
    if not isinstance(run.system, NonlinearCocycle):
        raise ConfigError(f"{kind} manifolds need a nonlinear system, got {run.cfg['system']['name']}")
    spec, _ = run.spectrum()
    ctx, chart = run.chart(kind, spec)
    return {"spectrum": spec.to_dict(), "context": ctx.to_dict(), "chart": chart.to_dict()}


def _run_validate(run: Run) -> dict:
    tol = run.tol
    spec, _ = run.spectrum("forward")
    spec_b, _ = run.spectrum("backward")
    out: dict[str, Any] = {"spectrum": spec.to_dict(), "spectrum_backward": spec_b.to_dict()}
    k = min(len(spec.Lambda), len(spec_b.Lambda))
    diffs = [abs(a - b) for a, b in zip(spec.Lambda[:k], spec_b.Lambda[:k])
             if math.isfinite(a) and math.isfinite(b)]
    run.check("forward_backward_agreement", max(diffs, default=0.0) <= 0.05,
              max_difference=max(diffs, default=0.0))
    c = run.linear
    n_check = run.h["n_check"]
    jobs: list[tuple[str, Callable[[], Any]]] = [
        ("temperedness_norm", lambda: temperedness_check(
            lambda q: float(np.linalg.norm(c.matrix(q), 2)), run.point, n_check, tol.temper_tol)),
    ]
    levels = run.levels(spec)
    if levels:
        s = run.splitting(spec)
        out["splitting"] = s.to_dict()
        jobs += [
            ("equivariance", lambda: verify_equivariance(c, s, 5)),
            ("rates", lambda: verify_rates(c, s, n_check)),
            ("volume_sums", lambda: verify_volume_sums(c, s, n_check)),
            ("temperedness_projection", lambda: temperedness_check(
                projection_norm_sampler(c, run.point, spec, levels, n_check), run.point,
                n_check, tol.temper_tol)),
        ]
    results = dict(zip([j[0] for j in jobs], run.map(lambda j: j[1](), jobs)))
    t = results["temperedness_norm"]
    run.check("temperedness_norm", t.tempered, **_values(t.to_dict()))
    out["temperedness_norm"] = t.to_dict()
    if levels:
        eq = results["equivariance"]
        run.check("equivariance", max(eq["distances"]) <= 1e-5, max_distance=max(eq["distances"]))
        rates = results["rates"]
        err = max(max(e["forward_error"], e["backward_error"]) for e in rates["levels"])
        run.check("rates", err <= 0.05, max_error=err)
        vs = results["volume_sums"]
        run.check("volume_sums", max(vs["forward_error"], vs["backward_error"]) <= 0.1,
                  forward_error=vs["forward_error"], backward_error=vs["backward_error"])
        tp = results["temperedness_projection"]
        run.check("temperedness_projection", tp.tempered, **_values(tp.to_dict()))
        out.update(equivariance=eq, rates=rates, volume_sums=vs,
                   temperedness_projection=tp.to_dict())
    if isinstance(run.system, NonlinearCocycle):
        charts = {}
        for kind in ("stable", "unstable"):
            try:
                ctx, chart = run.chart(kind, spec)
            except ValueError as exc:
                out[f"{kind}_skipped"] = str(exc)
                continue
            charts[kind] = chart
            entry = {"context": ctx.to_dict(), "chart": chart.to_dict()}
            fpc = max(fixed_point_orbit_check(ctx, v, fp.sequence)["max_abs"]
                      for v, fp in zip(chart.parameters, chart.fixed_points))
            run.check(f"{kind}_orbit_equivalence", fpc <= 1e-8, max_abs=fpc)
            tg = tangency_check(chart)
            run.check(f"{kind}_tangency", tg["ok"], delta=tg["delta"])
            un = uniqueness_check(ctx, chart.parameters[-1])
            run.check(f"{kind}_fixed_point_uniqueness", un["ok"], distance=un["distance"])
            lip = parameter_lipschitz_check(ctx, list(chart.parameters))
            run.check(f"{kind}_parameter_lipschitz", lip["ok"], max_ratio=lip["max_ratio"],
                      bound=lip["bound"])
            if kind == "stable":
                pc = pairwise_contraction(chart)
                run.check("stable_pairwise_contraction", pc["ok"], rate=pc["rate"], bound=pc["bound"])
            out[kind] = entry
        if len(charts) == 2:
            try:
                tr = transversality_check(charts["stable"], charts["unstable"])
                run.check("transversality", tr["ok"], volume=tr["volume"])
                out["transversality"] = tr
            except NonHyperbolicError as exc:
                out["transversality"] = {"refused": str(exc)}
    return out


def emit_plot_data(tables: dict[str, tuple[list[str], list[list]]], out_dir: Path) -> list[str]:
    """Write CSV tables; the first line documents the units."""
    written = []
    for name in sorted(tables):
        head, rows = tables[name]
        path = out_dir / name
        with path.open("w", newline="") as fh:
            fh.write("# rates and log growth values in nats (natural log)\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(head)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                            for x in row])
        written.append(name)
    return written


def run_analysis(analysis: str, cfg: dict, workers: int = 1) -> tuple[dict, int, "Run"]:
    """Execute an analysis; returns (results, exit code, run state)."""
    run = Run(cfg, workers)
    handlers = {
        "spectrum": _run_spectrum,
        "splitting": _run_splitting,
        "stable": lambda r: _run_manifold(r, "stable"),
        "unstable": lambda r: _run_manifold(r, "unstable"),
        "validate": _run_validate,
    }
    results = handlers[analysis](run)
    code = EXIT_OK
    if any(not c["ok"] and not c["hard"] for c in run.checks):
        code = EXIT_UNCONVERGED
    if any(not c["ok"] and c["hard"] for c in run.checks):
        code = EXIT_BOUND
    return results, code, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oseledets", description="Lyapunov spectra, Oseledets "
                                 "splittings and local invariant manifolds of cocycles.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="analysis", required=True)
    for name in ANALYSES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("results"))
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text()
        cfg = parse_config(text, str(args.config))
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["base"]["seed"] = int(args.seed)
        if cfg.get("analysis") not in (None, args.analysis):
            raise ConfigError(f"config analysis {cfg['analysis']!r} does not match "
                              f"subcommand {args.analysis!r}")
        cfg["analysis"] = args.analysis
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir: Path = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status: dict[str, Any] = {}
    run = None
    try:
        results, code, run = run_analysis(args.analysis, cfg, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BoundViolation as exc:
        results, code = {}, EXIT_BOUND
        status = {"error": "bound_violation", "bound": exc.bound, "message": str(exc)}
    except (UnconvergedError, UnresolvedLevelError) as exc:
        results, code = {}, EXIT_UNCONVERGED
        status = {"error": "unconverged", "message": str(exc)}
    except NonHyperbolicError as exc:
        results, code = {}, EXIT_BOUND
        status = {"error": "non_hyperbolic", "message": str(exc)}
    except ValueError as exc:
        results, code = {}, EXIT_BOUND
        status = {"error": "precondition", "message": str(exc)}
    elapsed = time.perf_counter() - t0
    report = {
        "version": __version__,
        "analysis": args.analysis,
        "config": cfg,
        "seed": cfg["base"]["seed"],
        "results": results,
        "checks": run.checks if run else [],
        "status": status,
        "exit_code": code,
    }
    (out_dir / cfg["output"]["report"]).write_text(dumps(report))
    (out_dir / "resolved_config.json").write_text(dumps(cfg))
    (out_dir / "timing.json").write_text(dumps({"wall_clock_seconds": elapsed,
                                                "workers": args.workers}))
    if cfg["output"]["csv"] and run is not None:
        emit_plot_data(run.csv, out_dir)
    for c in (run.checks if run else []):
        if not c["ok"]:
            print(f"check failed: {c['name']}", file=sys.stderr)
    if status:
        print(f"{status['error']}: {status['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
