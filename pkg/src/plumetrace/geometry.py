"""Plume geometry: transect layouts, candidate sources, change maps, search grids.

A candidate source together with an opening angle defines a triangular
(linear) plume.  Intersecting that plume with each flight transect yields a
pair of change-region boundaries in rescaled time, one ``(start, end]``
interval per component of the multivariate series.  All statistics downstream
consume only these boundary pairs, so this module fixes the single
rescaled-time-to-index convention used everywhere: the region for boundaries
``(s, e)`` on a series of length ``n`` covers 1-based times
``floor(n*s)+1 .. floor(n*e)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Transect",
    "TransectLayout",
    "PlumeParams",
    "ChangeMap",
    "ParamGrid",
    "linear_change_map",
    "change_map_table",
    "region_bounds",
    "build_grid",
]


@dataclass(frozen=True)
class Transect:
    """One flight leg: downwind distance and observation window.

    ``x_shift`` offsets the window along the transect and is the hook for
    compensating a wind change between legs during preprocessing.
    """

    y: float
    x_min: float
    x_max: float
    x_shift: float = 0.0

    def __post_init__(self):
        for name in ("y", "x_min", "x_max", "x_shift"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"transect field {name!r} must be finite")
        if self.y <= 0:
            raise ValueError("transect distance must be strictly positive")
        if not self.x_min < self.x_max:
            raise ValueError("transect window requires x_min < x_max")


@dataclass(frozen=True)
class TransectLayout:
    """Geometry of the flight path: ``d`` transects observed at ``n`` time points each."""

    n: int
    transects: tuple[Transect, ...]

    def __post_init__(self):
        object.__setattr__(self, "transects", tuple(self.transects))
        if self.n < 4:
            raise ValueError("layout requires n >= 4 time points")
        if len(self.transects) < 1:
            raise ValueError("layout requires at least one transect")
        ys = [t.y for t in self.transects]
        if any(b < a for a, b in zip(ys, ys[1:])):
            raise ValueError("transect distances must be nondecreasing")

    @property
    def d(self) -> int:
        return len(self.transects)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return (y, x_min, x_max, x_shift) as float arrays of length d."""
        t = self.transects
        return (
            np.array([s.y for s in t], dtype=float),
            np.array([s.x_min for s in t], dtype=float),
            np.array([s.x_max for s in t], dtype=float),
            np.array([s.x_shift for s in t], dtype=float),
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "transects": [
                {"y": t.y, "x_min": t.x_min, "x_max": t.x_max, "x_shift": t.x_shift}
                for t in self.transects
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TransectLayout":
        transects = tuple(
            Transect(
                y=float(t["y"]),
                x_min=float(t["x_min"]),
                x_max=float(t["x_max"]),
                x_shift=float(t.get("x_shift", 0.0)),
            )
            for t in payload["transects"]
        )
        return cls(n=int(payload["n"]), transects=transects)


@dataclass(frozen=True)
class PlumeParams:
    """Candidate source location and full opening angle (degrees)."""

    x: float
    y: float
    angle: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.angle)):
            raise ValueError("plume parameters must be finite")
        if not 0.0 < self.angle < 180.0:
            raise ValueError("opening angle must lie in (0, 180) degrees")

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "angle": self.angle}

    @classmethod
    def from_dict(cls, payload: dict) -> "PlumeParams":
        return cls(x=float(payload["x"]), y=float(payload["y"]), angle=float(payload["angle"]))


class ChangeMap:
    """Per-component change-region boundaries in rescaled time.

    The region of component ``i`` is ``(start[i], end[i]] ⊂ [0, 1]``; it is
    empty when ``start[i] == end[i]``.  A map is *strict* when every region is
    nonempty.
    """

    __slots__ = ("start", "end")

    def __init__(self, start, end):
        start = np.asarray(start, dtype=float).copy()
        end = np.asarray(end, dtype=float).copy()
        if start.shape != end.shape or start.ndim != 1:
            raise ValueError("boundary vectors must be 1-d and of equal length")
        if not (np.all(np.isfinite(start)) and np.all(np.isfinite(end))):
            raise ValueError("boundaries must be finite")
        if np.any(start < 0) or np.any(end > 1) or np.any(start > end):
            raise ValueError("boundaries must satisfy 0 <= start <= end <= 1")
        start.setflags(write=False)
        end.setflags(write=False)
        self.start = start
        self.end = end

    @property
    def d(self) -> int:
        return self.start.shape[0]

    def is_strict(self) -> bool:
        return bool(np.all(self.start < self.end))

    def __repr__(self):
        return f"ChangeMap(start={self.start!r}, end={self.end!r})"


@dataclass(frozen=True)
class ParamGrid:
    """Finite search grid over plume parameters.

    ``mode`` records how the grid was built: in ``"strict"`` mode every point
    yields a strict change map for its layout; ``"relaxed"`` grids may contain
    points with empty regions, which contribute zero to every statistic.
    """

    points: tuple[PlumeParams, ...]
    mode: str = "strict"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise ValueError("parameter grid is empty")
        if self.mode not in ("strict", "relaxed"):
            raise ValueError("grid mode must be 'strict' or 'relaxed'")
        if len(set(self.points)) != len(self.points):
            raise ValueError("parameter grid contains duplicate points")

    def __len__(self) -> int:
        return len(self.points)


def _half_widths(layout_y: np.ndarray, params: PlumeParams) -> np.ndarray:
    # Triangular plume with apex at the source: half-width grows linearly
    # with downwind distance at rate tan(angle/2).
    slope = math.tan(math.radians(params.angle) / 2.0)
    return (layout_y - params.y) * slope


def linear_change_map(layout: TransectLayout, params: PlumeParams) -> ChangeMap:
    """Boundaries cut by a triangular plume on each transect, in rescaled time.

    Transects at or upwind of the source get an empty region (start = end = 0).
    Boundaries are clamped to [0, 1], so a plume that misses a window entirely
    also yields an empty region.
    """
    y, x_min, x_max, shift = layout.arrays()
    half = _half_widths(y, params)
    width = x_max - x_min
    lo = np.clip((params.x - half - x_min - shift) / width, 0.0, 1.0)
    hi = np.clip((params.x + half - x_min - shift) / width, 0.0, 1.0)
    downwind = y > params.y
    lo = np.where(downwind, lo, 0.0)
    hi = np.where(downwind, hi, 0.0)
    return ChangeMap(lo, hi)


def change_map_table(layout: TransectLayout, points) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized change maps for many parameter points.

    Returns ``(start, end)`` arrays of shape ``(len(points), d)`` following
    the same conventions as :func:`linear_change_map`.
    """
    y, x_min, x_max, shift = layout.arrays()
    xs = np.array([p.x for p in points], dtype=float)[:, None]
    ys = np.array([p.y for p in points], dtype=float)[:, None]
    slopes = np.array([math.tan(math.radians(p.angle) / 2.0) for p in points])[:, None]
    half = (y[None, :] - ys) * slopes
    width = (x_max - x_min)[None, :]
    offset = (x_min + shift)[None, :]
    lo = np.clip((xs - half - offset) / width, 0.0, 1.0)
    hi = np.clip((xs + half - offset) / width, 0.0, 1.0)
    downwind = y[None, :] > ys
    lo = np.where(downwind, lo, 0.0)
    hi = np.where(downwind, hi, 0.0)
    return lo, hi


def region_bounds(start, end, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index bounds of the change region on a length-``n`` lattice.

    For boundaries ``(s, e)`` the region covers 1-based times
    ``floor(n*s)+1 .. floor(n*e)``, i.e. the 0-based slice ``lo:hi`` with
    ``lo = floor(n*s)`` and ``hi = floor(n*e)``.  Works elementwise on arrays.
    """
    lo = np.floor(n * np.asarray(start, dtype=float)).astype(np.int64)
    hi = np.floor(n * np.asarray(end, dtype=float)).astype(np.int64)
    return lo, hi


def _axis_values(rng: tuple[float, float, float]) -> np.ndarray:
    lo, hi, step = (float(v) for v in rng)
    if step <= 0:
        raise ValueError("grid step must be positive")
    if hi < lo:
        raise ValueError("grid range must satisfy min <= max")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def build_grid(
    x_range: tuple[float, float, float],
    y_range: tuple[float, float, float],
    angles,
    layout: TransectLayout,
    mode: str = "strict",
    length_bounds: tuple[float, float] | None = None,
) -> ParamGrid:
    """Cartesian search grid over source locations and opening angles.

    Points are ordered lexicographically by (x, y, angle) index, which fixes
    the deterministic argmax tie-break used by every statistic: the smallest
    grid index wins.  In strict mode, points whose change map has any empty
    region for ``layout`` are dropped; an empty result raises ``ValueError``.

    ``length_bounds = (lo, hi)`` additionally drops points where some
    component's region length falls outside ``[lo, hi]``.  Regions of length
    near 0 or 1 make the weighted statistics and the normalized projection
    objective degenerate, so search grids mixing wide angles with close
    sources should bound the lengths away from both ends.
    """
    angles = [float(a) for a in angles]
    if not angles:
        raise ValueError("at least one opening angle is required")
    xs = _axis_values(x_range)
    ys = _axis_values(y_range)
    points = [
        PlumeParams(x=float(x), y=float(y), angle=a)
        for x in xs
        for y in ys
        for a in angles
    ]
    if mode not in ("strict", "relaxed"):
        raise ValueError("grid mode must be 'strict' or 'relaxed'")
    keep = np.ones(len(points), dtype=bool)
    lo, hi = change_map_table(layout, points)
    if mode == "strict":
        keep &= np.all(lo < hi, axis=1)
    if length_bounds is not None:
        lo_len, hi_len = (float(v) for v in length_bounds)
        if not 0.0 <= lo_len < hi_len <= 1.0:
            raise ValueError("length bounds must satisfy 0 <= lo < hi <= 1")
        lengths = hi - lo
        keep &= np.all((lengths >= lo_len) & (lengths <= hi_len), axis=1)
    points = [p for p, k in zip(points, keep) if k]
    if not points:
        raise ValueError("grid is empty after filtering; relax the ranges or bounds")
    return ParamGrid(points=tuple(points), mode=mode)


def grid_from_dict(payload: dict, layout: TransectLayout) -> ParamGrid:
    """Build a grid from its JSON form: x/y ranges, angle list, mode, bounds."""
    bounds = payload.get("length_bounds")
    return build_grid(
        x_range=tuple(payload["x"]),
        y_range=tuple(payload["y"]),
        angles=payload["angles"],
        layout=layout,
        mode=payload.get("mode", "strict"),
        length_bounds=tuple(bounds) if bounds is not None else None,
    )
