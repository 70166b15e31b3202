"""Monte Carlo null distributions of the grid statistics.

Under the null both statistics converge to suprema of Brownian-bridge
functionals evaluated at the change-map boundaries of the search grid: the
multivariate statistic to a sum of squared independent bridge increments, the
projection statistic to an absolute sum of profile jumps times a single
bridge.  Neither supremum has a closed form over a realistic grid, so
critical values are simulated.  Bridges are sampled on the same lattice the
finite-sample statistics read (resolution defaults to the series length, jump
locations snap to the lattice), per-replicate streams are derived from
``(seed, replicate index)`` so results do not depend on execution order, and
full replicate vectors are cached so any quantile can be re-extracted.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, NumericalError
from .geometry import ParamGrid, TransectLayout, change_map_table
from .rng import derive_rng
from .stats import (
    CONST_PROFILE_RTOL,
    CovModel,
    WeightSpec,
    _componentwise_weights,
    _profile_coefficients,
)

__all__ = [
    "NullTable",
    "simulate_bridge",
    "mc_null_multivariate",
    "mc_null_projection",
    "p_value",
    "profile_moments",
    "table_fingerprint",
    "save_table",
    "load_table",
]

MIN_REPS = 100


@dataclass(frozen=True)
class NullTable:
    """Sorted Monte Carlo replicate values of a null limit.

    ``caveat`` flags multivariate tables whose covariance provenance does not
    guarantee independent bridges (the simulated limit may then be invalid);
    projection tables never carry it, their limit is covariance-robust.
    """

    stat_kind: str
    values: np.ndarray
    reps: int
    bridge_grid: int
    seed: int
    fingerprint: str
    caveat: bool = False
    n_skipped: int = 0

    def __post_init__(self):
        if self.stat_kind not in ("multivariate", "projection"):
            raise ValueError("stat_kind must be 'multivariate' or 'projection'")
        values = np.sort(np.asarray(self.values, dtype=float))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.reps < MIN_REPS or values.shape[0] != self.reps:
            raise ValueError(f"null table requires at least {MIN_REPS} replicates")

    def quantile(self, level: float) -> float:
        """Empirical order-statistic quantile (inverse CDF)."""
        if not 0.0 < level < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        idx = min(self.reps - 1, max(0, math.ceil(level * self.reps) - 1))
        return float(self.values[idx])

    def quantiles(self, levels) -> dict[float, float]:
        return {float(q): self.quantile(q) for q in levels}

    def to_dict(self) -> dict:
        return {
            "stat_kind": self.stat_kind,
            "seed": self.seed,
            "reps": self.reps,
            "bridge_grid": self.bridge_grid,
            "fingerprint": self.fingerprint,
            "caveat": self.caveat,
            "n_skipped": self.n_skipped,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NullTable":
        try:
            return cls(
                stat_kind=payload["stat_kind"],
                values=np.asarray(payload["values"], dtype=float),
                reps=int(payload["reps"]),
                bridge_grid=int(payload["bridge_grid"]),
                seed=int(payload["seed"]),
                fingerprint=str(payload["fingerprint"]),
                caveat=bool(payload.get("caveat", False)),
                n_skipped=int(payload.get("n_skipped", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"invalid null table payload: {exc}") from exc


def p_value(table: NullTable, observed: float) -> float:
    """Monte Carlo p-value: (1 + #{replicates >= observed}) / (reps + 1)."""
    count = int(np.count_nonzero(table.values >= observed))
    return (1 + count) / (table.reps + 1)


def simulate_bridge(m: int, rng: np.random.Generator) -> np.ndarray:
    """Standard Brownian bridge on {0, 1/m, ..., 1} from a random walk.

    Both endpoints are exactly zero.
    """
    if m < 2:
        raise ValueError("bridge resolution must be at least 2")
    walk = np.empty(m + 1)
    walk[0] = 0.0
    np.cumsum(rng.standard_normal(m) / math.sqrt(m), out=walk[1:])
    return walk - (np.arange(m + 1) / m) * walk[-1]


def _bridge_batch(d: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """d independent bridges drawn from one stream, shape (d, m+1)."""
    walk = np.zeros((d, m + 1))
    np.cumsum(rng.standard_normal((d, m)) / math.sqrt(m), axis=1, out=walk[:, 1:])
    return walk - (np.arange(m + 1) / m) * walk[:, -1:]


def table_fingerprint(
    stat_kind: str,
    layout: TransectLayout,
    grid: ParamGrid,
    weights: WeightSpec | None,
    bridge_grid: int,
    direction=None,
    cov: CovModel | None = None,
) -> str:
    """Stable hash of everything that determines a null table's law.

    The multivariate limit is covariance-free, so ``cov`` enters only for
    projection tables (jump sizes depend on it); the direction likewise.
    """
    payload = {
        "stat_kind": stat_kind,
        "layout": layout.to_dict(),
        "points": [(p.x, p.y, p.angle) for p in grid.points],
        "mode": grid.mode,
        "beta": weights.beta if weights is not None else 0.0,
        "scheme": weights.scheme if weights is not None else "none",
        "bridge_grid": bridge_grid,
    }
    if stat_kind == "projection":
        payload["direction"] = [float(v) for v in np.asarray(direction, dtype=float)]
        payload["cov"] = cov.to_dict() if cov is not None else None
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _replicate_values(fn, reps: int, threads: int) -> np.ndarray:
    out = np.empty(reps)
    if threads <= 1:
        for r in range(reps):
            out[r] = fn(r)
        return out

    def run_chunk(chunk):
        for r in chunk:
            out[r] = fn(r)

    chunks = np.array_split(np.arange(reps), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run_chunk, chunks))
    return out


def _mult_caveat(cov: CovModel | None) -> bool:
    if cov is None or cov.provenance == "known":
        return False
    return not (cov.provenance == "estimated" and cov.kind == "diagonal")


def mc_null_multivariate(
    layout: TransectLayout,
    grid: ParamGrid,
    weights: WeightSpec | None = None,
    reps: int = 2000,
    seed: int = 0,
    *,
    bridge_grid: int | None = None,
    cov: CovModel | None = None,
    threads: int = 1,
) -> NullTable:
    """Simulate the multivariate null limit over the given grid.

    Per replicate, d independent bridges are drawn and the supremum over grid
    points of the (optionally componentwise-weighted) squared-increment sum is
    recorded.  ``cov`` does not enter the simulation; it is consulted only to
    set the misspecification caveat flag.
    """
    if reps < MIN_REPS:
        raise ValueError(f"at least {MIN_REPS} replicates are required")
    if grid.mode != "strict":
        raise ValueError("null simulation requires a strict grid")
    m = layout.n if bridge_grid is None else int(bridge_grid)
    d = layout.d
    start, end = change_map_table(layout, grid.points)
    klo = np.floor(m * start).astype(np.int64)
    khi = np.floor(m * end).astype(np.int64)

    n_skipped = 0
    wsq = None
    if weights is not None and weights.scheme == "multivariate_componentwise" and weights.beta > 0:
        w, undefined = _componentwise_weights(start, end, weights.beta)
        keep = ~undefined
        n_skipped = int(undefined.sum())
        if not np.any(keep):
            raise NumericalError("all grid points have undefined weights")
        klo, khi, wsq = klo[keep], khi[keep], (w[keep]) ** 2
    elif weights is not None and weights.scheme == "projection":
        raise ValueError("projection weights do not apply to the multivariate limit")

    rows = np.arange(d)

    def one(rep: int) -> float:
        rng = derive_rng(seed, "null-mult", rep)
        bridge = _bridge_batch(d, m, rng)
        inc = bridge[rows, khi] - bridge[rows, klo]
        contrib = inc * inc if wsq is None else wsq * inc * inc
        return float(contrib.sum(axis=1).max())

    values = _replicate_values(one, reps, threads)
    fingerprint = table_fingerprint("multivariate", layout, grid, weights, m)
    return NullTable(
        stat_kind="multivariate",
        values=values,
        reps=reps,
        bridge_grid=m,
        seed=seed,
        fingerprint=fingerprint,
        caveat=_mult_caveat(cov),
        n_skipped=n_skipped,
    )


def profile_moments(start: np.ndarray, end: np.ndarray, coeffs: np.ndarray) -> tuple[float, float]:
    """Exact mean and variance of a piecewise-constant signal profile on [0, 1].

    Computed segment by segment between the sorted region boundaries, which is
    closed-form for these profiles.
    """
    bps = np.unique(np.concatenate([[0.0, 1.0], start, end]))
    mids = (bps[:-1] + bps[1:]) / 2.0
    lens = np.diff(bps)
    active = (start[None, :] < mids[:, None]) & (mids[:, None] <= end[None, :])
    vals = active @ coeffs
    mean = float(lens @ vals)
    var = float(lens @ (vals * vals)) - mean * mean
    return mean, max(var, 0.0)


def mc_null_projection(
    layout: TransectLayout,
    grid: ParamGrid,
    direction,
    cov: CovModel,
    weights: WeightSpec | None = None,
    reps: int = 2000,
    seed: int = 0,
    *,
    bridge_grid: int | None = None,
    threads: int = 1,
) -> NullTable:
    """Simulate the projection null limit over the given grid.

    Per replicate one bridge is drawn; each grid point contributes the
    absolute sum of its profile jumps times the bridge at the (snapped) jump
    locations, weighted by the continuum profile variance raised to ``-beta``
    when a projection weight is active.  Constant-profile points are skipped
    under an active weight.  This limit is valid irrespective of the
    covariance model, so no caveat flag is ever set.
    """
    if reps < MIN_REPS:
        raise ValueError(f"at least {MIN_REPS} replicates are required")
    if grid.mode != "strict":
        raise ValueError("null simulation requires a strict grid")
    if weights is not None and weights.scheme == "multivariate_componentwise":
        raise ValueError("componentwise weights do not apply to the projection limit")
    beta = weights.beta if weights is not None and weights.scheme == "projection" else 0.0
    m = layout.n if bridge_grid is None else int(bridge_grid)
    coeffs = _profile_coefficients(direction, cov)
    start, end = change_map_table(layout, grid.points)
    klo = np.floor(m * start).astype(np.int64)
    khi = np.floor(m * end).astype(np.int64)

    n_skipped = 0
    point_weight = None
    if beta > 0.0:
        moments = [profile_moments(start[p], end[p], coeffs) for p in range(len(grid.points))]
        var = np.array([v for _, v in moments])
        scale = np.array([v + mu * mu for mu, v in moments])
        constant = var <= CONST_PROFILE_RTOL * scale
        keep = ~constant
        n_skipped = int(constant.sum())
        if not np.any(keep):
            raise NumericalError("all grid points have a constant signal profile")
        klo, khi = klo[keep], khi[keep]
        point_weight = var[keep] ** (-beta)

    def one(rep: int) -> float:
        rng = derive_rng(seed, "null-proj", rep)
        bridge = simulate_bridge(m, rng)
        vals = np.abs((bridge[klo] - bridge[khi]) @ coeffs)
        if point_weight is not None:
            vals = vals * point_weight
        return float(vals.max())

    values = _replicate_values(one, reps, threads)
    fingerprint = table_fingerprint("projection", layout, grid, weights, m, direction=direction, cov=cov)
    return NullTable(
        stat_kind="projection",
        values=values,
        reps=reps,
        bridge_grid=m,
        seed=seed,
        fingerprint=fingerprint,
        caveat=False,
        n_skipped=n_skipped,
    )


def save_table(table: NullTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table.to_dict(), fh)
        fh.write("\n")


def load_table(path) -> NullTable:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read null table {path}: {exc}") from exc
    return NullTable.from_dict(payload)
