"""File formats: series CSV, layout/grid/direction/covariance JSON, reports.

The series CSV has header ``t,c1,...,cd``, one row per time index, UTF-8 with
LF line endings, and no missing values.  Floats are printed with 17
significant digits so a simulate/load round trip reproduces the in-memory
matrix exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .estimate import ReducedSurface, StatSurface
from .geometry import ParamGrid, TransectLayout, grid_from_dict
from .stats import CovModel

__all__ = [
    "write_series_csv",
    "read_series_csv",
    "load_layout",
    "load_grid",
    "load_direction",
    "load_cov",
    "write_json",
    "read_json",
    "write_surface_csv",
    "read_surface_csv",
    "write_reduced_csv",
]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_series_csv(path, x: np.ndarray) -> None:
    """Write a (d, n) matrix as a t,c1..cd table, one row per time point."""
    x = np.asarray(x, dtype=float)
    d, n = x.shape
    header = "t," + ",".join(f"c{i + 1}" for i in range(d))
    lines = [header]
    for t in range(n):
        lines.append(f"{t + 1}," + ",".join(_fmt(v) for v in x[:, t]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_series_csv(path) -> np.ndarray:
    """Read a series CSV back into a (d, n) matrix."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read series file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("t,"):
        raise DataFormatError(f"{path}: expected header starting with 't,'")
    d = len(lines[0].split(",")) - 1
    if d < 1:
        raise DataFormatError(f"{path}: no component columns")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != d + 1:
            raise DataFormatError(f"{path}: row has {len(parts) - 1} values, expected {d}")
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise DataFormatError(f"{path}: non-numeric value ({exc})") from exc
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    x = np.asarray(rows, dtype=float).T
    if not np.all(np.isfinite(x)):
        raise DataFormatError(f"{path}: non-finite values are not supported")
    return x


def read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read JSON file {path}: {exc}") from exc


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_layout(path) -> TransectLayout:
    payload = read_json(path)
    try:
        return TransectLayout.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid layout file {path}: {exc}") from exc


def load_grid(path, layout: TransectLayout) -> ParamGrid:
    payload = read_json(path)
    try:
        return grid_from_dict(payload, layout)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid grid file {path}: {exc}") from exc


def load_direction(path) -> np.ndarray:
    payload = read_json(path)
    if not isinstance(payload, list):
        raise DataFormatError(f"direction file {path} must hold a JSON array")
    try:
        vec = np.asarray([float(v) for v in payload], dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid direction file {path}: {exc}") from exc
    return vec


def load_cov(path) -> CovModel:
    payload = read_json(path)
    try:
        return CovModel.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid covariance file {path}: {exc}") from exc


def write_surface_csv(path, surface: StatSurface) -> None:
    """Write the full surface as x,y,alpha,value rows (one per grid point)."""
    lines = ["x,y,alpha,value"]
    for p, v in zip(surface.params, surface.values):
        lines.append(f"{_fmt(p.x)},{_fmt(p.y)},{_fmt(p.angle)},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_surface_csv(path) -> list[tuple[float, float, float, float]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read surface file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "x,y,alpha,value":
        raise DataFormatError(f"{path}: expected header 'x,y,alpha,value'")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise DataFormatError(f"{path}: malformed surface row {ln!r}")
        try:
            rows.append(tuple(float(v) for v in parts))
        except ValueError as exc:
            raise DataFormatError(f"{path}: non-numeric value ({exc})") from exc
    if not rows:
        raise DataFormatError(f"{path}: no surface rows")
    return rows


def write_reduced_csv(path, reduced: ReducedSurface) -> None:
    lines = ["x,y,value"]
    for (x, y), v in reduced.cells.items():
        lines.append(f"{_fmt(x)},{_fmt(y)},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
