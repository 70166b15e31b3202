"""Command-line interface.

Subcommands: ``simulate`` (synthetic series + truth sidecar), ``estimate``
(source estimates, surfaces, heatmaps), ``test`` (decision report against a
Monte Carlo null table), ``critvals`` (build/refresh the null-table cache)
and ``heatmap`` (render a surface CSV).  All inputs come from a JSON config
file; the flags below override the matching config fields.  Every random
quantity flows from the single seed through purpose-tagged streams, so adding
a subcommand never perturbs existing outputs.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import DataFormatError, NumericalError
from .estimate import (
    ReducedSurface,
    StatSurface,
    constant_profile_points,
    estimate_multivariate,
    estimate_projection,
    reduce_surface,
    subgrid,
)
from .geometry import ParamGrid, TransectLayout
from .heatmap import render_heatmap_svg
from .limits import (
    NullTable,
    load_table,
    mc_null_multivariate,
    mc_null_projection,
    p_value,
    save_table,
    table_fingerprint,
)
from .lrv import diag_cov, projected_sigma
from .simulate import SimDesign, gen_dataset
from .stats import CovModel, WeightSpec, t_multivariate, t_projection

CACHE_ENV = "PLUMETRACE_CACHE_DIR"


class UsageError(Exception):
    """Bad flag or config value; maps to exit code 2."""


@dataclass
class RunConfig:
    """Resolved run configuration (config file merged with flag overrides)."""

    base: Path
    series: str | None = None
    layout: str | None = None
    grid: str | None = None
    stat: str = "both"
    direction: str | None = None
    cov: str = "estimate"
    beta: float = 0.0
    alpha_level: float = 0.05
    reps: int = 2000
    seed: int = 0
    threads: int = 1
    out: str = "."
    design: dict | None = None
    surface: str | None = None
    cache_dir: str | None = None

    def validate(self) -> None:
        if self.stat not in ("mult", "proj", "both"):
            raise UsageError("stat must be one of mult, proj, both")
        if not 0.0 < self.alpha_level < 1.0:
            raise UsageError("alpha-level must lie in (0, 1)")
        if not 0.0 <= self.beta <= 0.5:
            raise UsageError("beta must lie in [0, 1/2]")
        if self.reps < 100:
            raise UsageError("reps must be at least 100")
        if self.threads < 1:
            raise UsageError("threads must be at least 1")

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def out_dir(self) -> Path:
        out = self.path(self.out)
        out.mkdir(parents=True, exist_ok=True)
        return out

    def cache_path(self) -> Path:
        env = os.environ.get(CACHE_ENV)
        if env:
            cache = Path(env)
        elif self.cache_dir:
            cache = self.path(self.cache_dir)
        else:
            cache = self.out_dir() / "critvals_cache"
        cache.mkdir(parents=True, exist_ok=True)
        return cache


_CONFIG_FIELDS = (
    "series",
    "layout",
    "grid",
    "stat",
    "direction",
    "cov",
    "beta",
    "alpha_level",
    "reps",
    "seed",
    "threads",
    "out",
    "design",
    "surface",
    "cache_dir",
)


def _load_config(args: argparse.Namespace) -> RunConfig:
    payload = {}
    base = Path.cwd()
    if args.config:
        cfg_path = Path(args.config)
        payload = io.read_json(cfg_path)
        if not isinstance(payload, dict):
            raise DataFormatError(f"config {cfg_path} must hold a JSON object")
        base = cfg_path.resolve().parent
    unknown = set(payload) - set(_CONFIG_FIELDS)
    if unknown:
        raise DataFormatError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(base=base)
    for key in _CONFIG_FIELDS:
        if key in payload and payload[key] is not None:
            setattr(cfg, key, payload[key])
    for key in ("stat", "beta", "alpha_level", "reps", "seed", "threads"):
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, flag)
    if getattr(args, "out", None) is not None:
        cfg.out = str(Path(args.out).absolute())  # flag paths resolve from the caller
    cfg.beta = float(cfg.beta)
    cfg.alpha_level = float(cfg.alpha_level)
    cfg.reps = int(cfg.reps)
    cfg.seed = int(cfg.seed)
    cfg.threads = int(cfg.threads)
    cfg.validate()
    return cfg


def _require(cfg: RunConfig, *fields: str) -> None:
    missing = [f for f in fields if getattr(cfg, f) is None]
    if missing:
        raise UsageError(f"config is missing required fields: {', '.join(missing)}")


def _load_inputs(cfg: RunConfig) -> tuple[np.ndarray, TransectLayout, ParamGrid]:
    _require(cfg, "series", "layout", "grid")
    layout = io.load_layout(cfg.path(cfg.layout))
    x = io.read_series_csv(cfg.path(cfg.series))
    if x.shape[0] != layout.d or x.shape[1] != layout.n:
        raise DataFormatError(
            f"series shape {x.shape} does not match layout (d={layout.d}, n={layout.n})"
        )
    grid = io.load_grid(cfg.path(cfg.grid), layout)
    return x, layout, grid


def _resolve_cov(cfg: RunConfig, x: np.ndarray) -> CovModel:
    if cfg.cov == "estimate":
        return diag_cov(x)
    cov = io.load_cov(cfg.path(cfg.cov))
    if cov.d != x.shape[0]:
        raise DataFormatError("covariance dimension does not match the series")
    return cov


def _load_dir(cfg: RunConfig, d: int) -> np.ndarray:
    _require(cfg, "direction")
    vec = io.load_direction(cfg.path(cfg.direction))
    if vec.shape[0] != d:
        raise DataFormatError("direction length does not match the series")
    return vec


def _stats_selected(cfg: RunConfig) -> list[str]:
    return ["mult", "proj"] if cfg.stat == "both" else [cfg.stat]


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    _require(cfg, "design")
    design_payload = cfg.design
    if isinstance(design_payload, str):
        design_payload = io.read_json(cfg.path(design_payload))
    try:
        design = SimDesign.from_dict(design_payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid design: {exc}") from exc
    if args.seed is not None:
        design = SimDesign.from_dict({**design.to_dict(), "seed": int(args.seed)})
    series = gen_dataset(design, noiseless=bool(args.noiseless))
    out = cfg.out_dir()
    io.write_series_csv(out / "series.csv", series.x)
    io.write_json(
        out / "truth.json",
        {
            "design": design.to_dict(),
            "params": series.truth.params.to_dict(),
            "baseline": series.truth.baseline.tolist(),
            "shift": series.truth.shift.tolist(),
            "noiseless": bool(args.noiseless),
        },
    )
    print(f"wrote {out / 'series.csv'} ({series.d}x{series.n}) and truth.json")
    return 0


def _expand_surface(grid: ParamGrid, sub: StatSurface, kept: np.ndarray, n_dropped: int) -> StatSurface:
    values = np.full(len(grid.points), np.nan)
    values[kept] = sub.values
    argmax = int(kept[sub.argmax_index])
    ties = tuple(int(kept[i]) for i in sub.near_ties)
    return StatSurface(
        params=grid.points,
        values=values,
        argmax_index=argmax,
        near_ties=ties,
        n_skipped=n_dropped,
    )


def _theta_payload(surface: StatSurface) -> dict:
    top = surface.argmax
    return {
        "theta": top.to_dict(),
        "value": surface.max_value,
        "near_ties": [surface.params[i].to_dict() for i in surface.near_ties],
        "n_skipped": surface.n_skipped,
    }


def cmd_estimate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    x, layout, grid = _load_inputs(cfg)
    if grid.mode != "strict":
        raise UsageError("estimation requires a strict grid")
    cov = _resolve_cov(cfg, x)
    out = cfg.out_dir()
    report: dict = {"cov": cov.to_dict(), "stats": {}}
    started = time.perf_counter()
    for stat in _stats_selected(cfg):
        if stat == "mult":
            weights = (
                WeightSpec(beta=cfg.beta, scheme="multivariate_componentwise")
                if cfg.beta > 0
                else None
            )
            _, surface = estimate_multivariate(x, layout, grid, cov, weights)
        else:
            direction = _load_dir(cfg, layout.d)
            dropped = constant_profile_points(layout, grid, direction, cov)
            if dropped.size:
                sub, kept = subgrid(grid, dropped)
                _, sub_surface = estimate_projection(x, layout, sub, direction, cov)
                surface = _expand_surface(grid, sub_surface, kept, int(dropped.size))
            else:
                _, surface = estimate_projection(x, layout, grid, direction, cov)
            try:
                report["sigma"] = math.sqrt(projected_sigma(x, direction, cov).sigma2)
            except NumericalError:
                report["sigma"] = None  # degenerate residuals (e.g. noise-free fixtures)
        reduced = reduce_surface(surface)
        io.write_surface_csv(out / f"surface_{stat}.csv", surface)
        io.write_reduced_csv(out / f"reduced_{stat}.csv", reduced)
        render_heatmap_svg(reduced, out / f"heatmap_{stat}.svg")
        report["stats"][stat] = _theta_payload(surface)
    report["runtime_seconds"] = time.perf_counter() - started
    io.write_json(out / "estimate_report.json", report)
    for stat, payload in report["stats"].items():
        t = payload["theta"]
        print(f"{stat}: source=({t['x']:g}, {t['y']:g}) angle={t['angle']:g} value={payload['value']:.6g}")
    return 0


def _table_for(
    cfg: RunConfig,
    stat: str,
    layout: TransectLayout,
    grid: ParamGrid,
    weights: WeightSpec | None,
    direction,
    cov: CovModel | None,
    regen: bool,
) -> NullTable:
    if stat == "mult":
        fingerprint = table_fingerprint("multivariate", layout, grid, weights, layout.n)
    else:
        fingerprint = table_fingerprint(
            "projection", layout, grid, weights, layout.n, direction=direction, cov=cov
        )
    cache_file = cfg.cache_path() / f"{stat}-{fingerprint}.json"
    if cache_file.exists() and not regen:
        table = load_table(cache_file)
        if table.fingerprint != fingerprint:
            raise DataFormatError(
                f"cached table {cache_file} carries fingerprint {table.fingerprint}, "
                f"expected {fingerprint}; rerun with --regen to rebuild"
            )
        if table.seed == cfg.seed and table.reps == cfg.reps:
            return table
    if stat == "mult":
        table = mc_null_multivariate(
            layout, grid, weights, reps=cfg.reps, seed=cfg.seed, cov=cov, threads=cfg.threads
        )
    else:
        table = mc_null_projection(
            layout,
            grid,
            direction,
            cov,
            weights,
            reps=cfg.reps,
            seed=cfg.seed,
            threads=cfg.threads,
        )
    save_table(table, cache_file)
    return table


def cmd_test(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    x, layout, grid = _load_inputs(cfg)
    if grid.mode != "strict":
        raise UsageError("testing requires a strict grid")
    cov = _resolve_cov(cfg, x)
    out = cfg.out_dir()
    report: dict = {"alpha_level": cfg.alpha_level, "cov_provenance": cov.provenance, "stats": {}}
    for stat in _stats_selected(cfg):
        if stat == "mult":
            weights = (
                WeightSpec(beta=cfg.beta, scheme="multivariate_componentwise")
                if cfg.beta > 0
                else None
            )
            result = t_multivariate(x, grid, layout, cov, weights)
            table = _table_for(cfg, stat, layout, grid, weights, None, cov, args.regen)
            caveat = table.caveat or not (
                cov.provenance == "known"
                or (cov.provenance == "estimated" and cov.kind == "diagonal")
            )
        else:
            direction = _load_dir(cfg, layout.d)
            weights = WeightSpec(beta=cfg.beta, scheme="projection") if cfg.beta > 0 else None
            sigma = math.sqrt(projected_sigma(x, direction, cov).sigma2)
            result = t_projection(x, grid, layout, direction, cov, sigma, weights)
            table = _table_for(cfg, stat, layout, grid, weights, direction, cov, args.regen)
            caveat = False
        pv = p_value(table, result.value)
        report["stats"][stat] = {
            "value": result.value,
            "p_value": pv,
            "reject": pv <= cfg.alpha_level,
            "critical_value": table.quantile(1.0 - cfg.alpha_level),
            "fingerprint": table.fingerprint,
            "reps": table.reps,
            "table_seed": table.seed,
            "caveat": bool(caveat),
            "n_skipped": result.n_skipped,
            "argmax": result.argmax.to_dict(),
        }
        if stat == "proj":
            report["stats"][stat]["sigma"] = sigma
    io.write_json(out / "test_report.json", report)
    for stat, payload in report["stats"].items():
        verdict = "reject" if payload["reject"] else "retain"
        print(f"{stat}: T={payload['value']:.6g} p={payload['p_value']:.4g} -> {verdict}")
    return 0


def cmd_critvals(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    _require(cfg, "layout", "grid")
    layout = io.load_layout(cfg.path(cfg.layout))
    grid = io.load_grid(cfg.path(cfg.grid), layout)
    if grid.mode != "strict":
        raise UsageError("critical values require a strict grid")
    out = cfg.out_dir()
    levels = (0.9, 0.95, 0.99)
    report: dict = {"stats": {}}
    for stat in _stats_selected(cfg):
        cov = None
        direction = None
        if stat == "mult":
            weights = (
                WeightSpec(beta=cfg.beta, scheme="multivariate_componentwise")
                if cfg.beta > 0
                else None
            )
        else:
            if cfg.cov == "estimate":
                raise UsageError(
                    "projection critical values need an explicit covariance file "
                    "(the limit depends on it); set cov to a file path"
                )
            cov = io.load_cov(cfg.path(cfg.cov))
            direction = _load_dir(cfg, layout.d)
            weights = WeightSpec(beta=cfg.beta, scheme="projection") if cfg.beta > 0 else None
        table = _table_for(cfg, stat, layout, grid, weights, direction, cov, args.regen)
        report["stats"][stat] = {
            "fingerprint": table.fingerprint,
            "reps": table.reps,
            "seed": table.seed,
            "caveat": table.caveat,
            "quantiles": {str(q): table.quantile(q) for q in levels},
            "cache_file": str(cfg.cache_path() / f"{stat}-{table.fingerprint}.json"),
        }
        quants = " ".join(f"q{q}={table.quantile(q):.5g}" for q in levels)
        print(f"{stat}: {quants} ({table.reps} reps, fingerprint {table.fingerprint})")
    io.write_json(out / "critvals_report.json", report)
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    _require(cfg, "surface")
    rows = io.read_surface_csv(cfg.path(cfg.surface))
    cells: dict[tuple[float, float], float] = {}
    best: tuple[float, tuple[float, float]] | None = None
    for x, y, _, v in rows:
        key = (x, y)
        prev = cells.get(key)
        if prev is None or math.isnan(prev) or (not math.isnan(v) and v > prev):
            cells[key] = v
        if not math.isnan(v) and (best is None or v > best[0]):
            best = (v, key)
    if best is None:
        raise NumericalError("surface contains no finite values")
    reduced = ReducedSurface(cells=cells, argmax=best[1])
    out = cfg.out_dir()
    render_heatmap_svg(reduced, out / "heatmap.svg")
    print(f"wrote {out / 'heatmap.svg'}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plumetrace",
        description="Gas-source localization from multivariate transect series",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": cmd_simulate,
        "estimate": cmd_estimate,
        "test": cmd_test,
        "critvals": cmd_critvals,
        "heatmap": cmd_heatmap,
    }
    for name, fn in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--stat", choices=("mult", "proj", "both"), default=None)
        p.add_argument("--beta", type=float, default=None)
        p.add_argument("--alpha-level", dest="alpha_level", type=float, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--noiseless", action="store_true")
        p.add_argument("--regen", action="store_true")
        p.add_argument("--out", default=None)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
