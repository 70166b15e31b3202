"""Aggregation statistics over candidate change maps.

Two ways of pooling evidence across transects are implemented.  The
*multivariate* route forms, for every candidate map, the vector of centered
region sums and measures its size in the metric of (an estimate of) the
long-run covariance.  The *projection* route first collapses the series onto
an assumed change direction and then correlates the resulting univariate
series with the piecewise-constant signal profile that the candidate map
induces.  Both routes expose a grid-maximized statistic alongside the full
per-point surface, with the argmax tie always broken toward the smallest grid
index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericalError
from .geometry import ChangeMap, ParamGrid, PlumeParams, TransectLayout, change_map_table, region_bounds

__all__ = [
    "CovModel",
    "WeightSpec",
    "MultiSeries",
    "StatMax",
    "region_sum",
    "region_sums",
    "multivariate_form",
    "t_multivariate",
    "direction_coefficients",
    "project_series",
    "signal_profile",
    "signal_profile_lattice",
    "signal_jumps",
    "projection_objective",
    "jump_form_objective",
    "t_projection",
]

# Relative eigenvalue cutoff below which a full covariance counts as singular.
EIG_RTOL = 1e-10

# Relative threshold under which a lattice signal profile counts as constant.
CONST_PROFILE_RTOL = 1e-12


@dataclass(eq=False)
class CovModel:
    """Long-run covariance used to standardize the statistics.

    ``kind`` is ``"diagonal"`` (values = d long-run variances) or ``"full"``
    (values = d x d symmetric positive definite matrix).  ``provenance``
    records where the model came from: ``"known"`` (simulation truth),
    ``"estimated"`` (fitted from the data) or ``"user"`` (supplied from a
    file).  Full matrices are validated by eigendecomposition at construction;
    eigenvalues below ``EIG_RTOL`` times the largest one raise
    :class:`NumericalError`.
    """

    kind: str
    values: np.ndarray
    provenance: str = "user"

    def __post_init__(self):
        if self.kind not in ("diagonal", "full"):
            raise ValueError("covariance kind must be 'diagonal' or 'full'")
        if self.provenance not in ("known", "estimated", "user"):
            raise ValueError("covariance provenance must be known/estimated/user")
        values = np.asarray(self.values, dtype=float)
        if self.kind == "diagonal":
            if values.ndim != 1:
                raise ValueError("diagonal covariance expects a vector of variances")
            if not np.all(np.isfinite(values)) or np.any(values <= 0):
                raise NumericalError("diagonal covariance requires strictly positive variances")
            self._eigvals = None
            self._eigvecs = None
        else:
            if values.ndim != 2 or values.shape[0] != values.shape[1]:
                raise ValueError("full covariance expects a square matrix")
            if not np.all(np.isfinite(values)):
                raise ValueError("covariance entries must be finite")
            if not np.allclose(values, values.T, rtol=1e-10, atol=1e-12):
                raise ValueError("full covariance must be symmetric")
            sym = (values + values.T) / 2.0
            eigvals, eigvecs = np.linalg.eigh(sym)
            if eigvals[-1] <= 0 or eigvals[0] < EIG_RTOL * eigvals[-1]:
                raise NumericalError("covariance is singular or not positive definite")
            self._eigvals = eigvals
            self._eigvecs = eigvecs
            values = sym
        values.setflags(write=False)
        self.values = values

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def inv_apply(self, vec: np.ndarray) -> np.ndarray:
        """Return covariance^{-1} @ vec."""
        vec = np.asarray(vec, dtype=float)
        if self.kind == "diagonal":
            return vec / self.values
        w = self._eigvecs.T @ vec
        return self._eigvecs @ (w / self._eigvals)

    def inv_sqrt_matrix(self) -> np.ndarray:
        """Symmetric inverse square root (diagonal models return a vector)."""
        if self.kind == "diagonal":
            return 1.0 / np.sqrt(self.values)
        return self._eigvecs @ np.diag(1.0 / np.sqrt(self._eigvals)) @ self._eigvecs.T

    def quad_inv(self, vecs: np.ndarray) -> np.ndarray:
        """Rowwise quadratic form v covariance^{-1} v^T for ``vecs`` of shape (..., d)."""
        vecs = np.asarray(vecs, dtype=float)
        if self.kind == "diagonal":
            return np.sum(vecs * vecs / self.values, axis=-1)
        half = vecs @ self.inv_sqrt_matrix()
        return np.sum(half * half, axis=-1)

    def scaled(self, factor: float) -> "CovModel":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return CovModel(kind=self.kind, values=self.values * factor, provenance=self.provenance)

    def to_dict(self) -> dict:
        vals = self.values.tolist()
        return {"kind": self.kind, "values": vals, "provenance": self.provenance}

    @classmethod
    def from_dict(cls, payload: dict) -> "CovModel":
        return cls(
            kind=payload["kind"],
            values=np.asarray(payload["values"], dtype=float),
            provenance=payload.get("provenance", "user"),
        )


@dataclass(frozen=True)
class WeightSpec:
    """Weighting of the grid statistics.

    ``scheme`` selects the weight family: ``"multivariate_componentwise"``
    penalizes each region sum by ``((end-start)(1-end+start))^-beta`` and is
    only defined for diagonal covariances; ``"projection"`` divides the
    projection objective by the lattice variance of the signal profile raised
    to ``beta``.  ``beta = 0`` reproduces the unweighted statistics exactly.
    """

    beta: float = 0.0
    scheme: str = "none"

    def __post_init__(self):
        if not 0.0 <= self.beta <= 0.5:
            raise ValueError("weight exponent beta must lie in [0, 1/2]")
        if self.scheme not in ("none", "multivariate_componentwise", "projection"):
            raise ValueError("unknown weight scheme")

    @property
    def active(self) -> bool:
        return self.scheme != "none" and self.beta > 0.0


@dataclass
class SimTruth:
    """Ground truth attached to a synthetic series."""

    baseline: np.ndarray
    shift: np.ndarray
    params: PlumeParams


@dataclass
class MultiSeries:
    """A d x n observation matrix, optionally carrying simulation truth."""

    x: np.ndarray
    truth: SimTruth | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise ValueError("series matrix must be 2-dimensional (components x time)")
        if not np.all(np.isfinite(x)):
            raise ValueError("series contains non-finite values")
        self.x = x

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]


class StatMax(NamedTuple):
    """Result of maximizing a statistic over a grid."""

    value: float
    argmax: PlumeParams
    argmax_index: int
    surface: np.ndarray
    n_skipped: int


def _as_matrix(series) -> np.ndarray:
    x = series.x if isinstance(series, MultiSeries) else np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return np.asarray(x, dtype=float)


def _centered_prefix(x: np.ndarray) -> np.ndarray:
    """Prefix sums of the rowwise-centered matrix, shape (d, n+1)."""
    centered = x - x.mean(axis=1, keepdims=True)
    out = np.zeros((x.shape[0], x.shape[1] + 1))
    np.cumsum(centered, axis=1, out=out[:, 1:])
    return out


def region_sums(series, cm: ChangeMap) -> np.ndarray:
    """Centered sums over each component's change region."""
    x = _as_matrix(series)
    if cm.d != x.shape[0]:
        raise ValueError("change map dimension does not match series")
    lo, hi = region_bounds(cm.start, cm.end, x.shape[1])
    prefix = _centered_prefix(x)
    rows = np.arange(x.shape[0])
    return prefix[rows, hi] - prefix[rows, lo]


def region_sum(series, cm: ChangeMap, i: int) -> float:
    """Centered sum of component ``i`` over its change region; 0 when empty."""
    x = _as_matrix(series)
    if not 0 <= i < x.shape[0]:
        raise ValueError("component index out of range")
    return float(region_sums(x[i], ChangeMap(cm.start[i : i + 1], cm.end[i : i + 1]))[0])


def multivariate_form(series, cm: ChangeMap, cov: CovModel) -> float:
    """Quadratic form of the region sums in the inverse-covariance metric."""
    sums = region_sums(series, cm)
    if cov.d != sums.shape[0]:
        raise ValueError("covariance dimension does not match series")
    return float(cov.quad_inv(sums))


def _componentwise_weights(start: np.ndarray, end: np.ndarray, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-component weights ((end-start)(1-end+start))^-beta.

    Returns (weights, undefined_mask) where the mask marks grid points with a
    zero base in some component, for which the weighted statistic is undefined.
    """
    length = end - start
    base = length * (1.0 - length)
    undefined = np.any(base <= 0.0, axis=-1)
    safe = np.where(base > 0.0, base, 1.0)
    return safe ** (-beta), undefined


def multivariate_surface(
    series,
    layout: TransectLayout,
    grid: ParamGrid,
    cov: CovModel,
    weights: WeightSpec | None = None,
) -> tuple[np.ndarray, int]:
    """Quadratic-form values for every grid point (NaN where undefined).

    Componentwise weighting requires a diagonal covariance; weighted-undefined
    points (a region of length 0 or 1 in some component) are skipped and
    counted.
    """
    x = _as_matrix(series)
    d, n = x.shape
    if layout.d != d or layout.n != n:
        raise ValueError("series shape does not match layout")
    if cov.d != d:
        raise ValueError("covariance dimension does not match series")
    start, end = change_map_table(layout, grid.points)
    lo, hi = region_bounds(start, end, n)
    prefix = _centered_prefix(x)
    rows = np.arange(d)
    sums = prefix[rows, hi] - prefix[rows, lo]

    n_skipped = 0
    if weights is not None and weights.scheme == "multivariate_componentwise" and weights.beta > 0:
        if cov.kind != "diagonal":
            raise ValueError("componentwise weights require a diagonal covariance")
        w, undefined = _componentwise_weights(start, end, weights.beta)
        sums = sums * w
        values = cov.quad_inv(sums)
        if np.any(undefined):
            values = np.where(undefined, np.nan, values)
            n_skipped = int(undefined.sum())
    elif weights is not None and weights.scheme == "projection":
        raise ValueError("projection weights do not apply to the multivariate statistic")
    else:
        values = cov.quad_inv(sums)
    return values, n_skipped


def _argmax_finite(values: np.ndarray) -> int:
    finite = np.isfinite(values)
    if not np.any(finite):
        raise NumericalError("all grid points were skipped")
    idx = np.flatnonzero(finite)
    return int(idx[np.argmax(values[idx])])


def t_multivariate(
    series,
    grid: ParamGrid,
    layout: TransectLayout,
    cov: CovModel,
    weights: WeightSpec | None = None,
) -> StatMax:
    """Grid maximum of the (optionally weighted) multivariate statistic.

    The reported value and surface are scaled by 1/n; the argmax is taken on
    the raw quadratic forms so it coincides exactly with the estimator's.
    """
    x = _as_matrix(series)
    n = x.shape[1]
    raw, n_skipped = multivariate_surface(x, layout, grid, cov, weights)
    k = _argmax_finite(raw)
    return StatMax(
        value=float(raw[k] / n),
        argmax=grid.points[k],
        argmax_index=k,
        surface=raw / n,
        n_skipped=n_skipped,
    )


def direction_coefficients(direction, cov: CovModel) -> tuple[np.ndarray, np.ndarray, float]:
    """Standardization of a change direction against a covariance model.

    A direction carries relative magnitudes only, so it is first canonicalized
    to unit Euclidean norm; every projection quantity is therefore invariant
    under positive rescaling of the supplied vector.  Returns
    ``(unit, cov^{-1} @ unit, norm)`` with
    ``norm = sqrt(unit^T cov^{-1} unit)``, the building blocks of both the
    projected series and the signal profile.
    """
    vec = np.asarray(direction, dtype=float)
    if vec.ndim != 1:
        raise ValueError("direction must be a vector")
    if not np.all(np.isfinite(vec)):
        raise ValueError("direction must be finite")
    if not np.any(vec != 0.0):
        raise ValueError("direction must have at least one nonzero entry")
    if cov.d != vec.shape[0]:
        raise ValueError("direction length does not match covariance dimension")
    unit = vec / np.linalg.norm(vec)
    solved = cov.inv_apply(unit)
    norm = math.sqrt(float(unit @ solved))
    return unit, solved, norm


def project_series(series, direction, cov: CovModel) -> np.ndarray:
    """Collapse the matrix onto the standardized change direction."""
    x = _as_matrix(series)
    _, solved, norm = direction_coefficients(direction, cov)
    if x.shape[0] != solved.shape[0]:
        raise ValueError("direction length does not match series")
    return (solved / norm) @ x


def _profile_coefficients(direction, cov: CovModel) -> np.ndarray:
    """Per-component height contributed to the signal profile while active."""
    unit, solved, norm = direction_coefficients(direction, cov)
    return unit * solved / norm


def signal_profile(cm: ChangeMap, direction, cov: CovModel, s: float) -> float:
    """Signal profile of the projected series at rescaled time ``s``.

    Piecewise constant and left-continuous in ``s``: component ``i``
    contributes while ``start[i] < s <= end[i]``.
    """
    coeffs = _profile_coefficients(direction, cov)
    if cm.d != coeffs.shape[0]:
        raise ValueError("change map dimension does not match direction")
    active = (cm.start < s) & (s <= cm.end)
    return float(coeffs[active].sum())


def signal_profile_lattice(cm: ChangeMap, direction, cov: CovModel, n: int) -> np.ndarray:
    """Signal profile sampled at t/n for t = 1..n (shared index convention)."""
    coeffs = _profile_coefficients(direction, cov)
    lo, hi = region_bounds(cm.start, cm.end, n)
    out = np.zeros(n)
    for i in range(cm.d):
        out[lo[i] : hi[i]] += coeffs[i]
    return out


def signal_jumps(cm: ChangeMap, direction, cov: CovModel) -> tuple[np.ndarray, np.ndarray]:
    """Discontinuities of the signal profile: (locations, jump sizes).

    Jumps at coincident boundaries are aggregated; locations with zero net
    jump are dropped.  The result always has at most 2d entries.
    """
    coeffs = _profile_coefficients(direction, cov)
    locs = np.concatenate([cm.start, cm.end])
    sizes = np.concatenate([coeffs, -coeffs])
    uniq, inverse = np.unique(locs, return_inverse=True)
    net = np.zeros_like(uniq)
    np.add.at(net, inverse, sizes)
    keep = net != 0.0
    assert keep.sum() <= 2 * cm.d
    return uniq[keep], net[keep]


def projection_objective(series, cm: ChangeMap, direction, cov: CovModel) -> float:
    """Absolute covariance between the signal profile and the centered projection."""
    x = _as_matrix(series)
    y = project_series(x, direction, cov)
    profile = signal_profile_lattice(cm, direction, cov, x.shape[1])
    return float(abs(profile @ (y - y.mean())))


def jump_form_objective(series, cm: ChangeMap, direction, cov: CovModel) -> float:
    """Prefix-sum form of :func:`projection_objective` via the profile jumps.

    Algebraically identical to the direct sum: summation by parts turns the
    lattice inner product into a sum of jump sizes times partial sums of the
    centered projection at the jump locations.
    """
    x = _as_matrix(series)
    n = x.shape[1]
    y = project_series(x, direction, cov)
    centered = y - y.mean()
    prefix = np.concatenate([[0.0], np.cumsum(centered)])
    locs, sizes = signal_jumps(cm, direction, cov)
    inside = (locs > 0.0) & (locs < 1.0)
    idx = np.floor(n * locs[inside]).astype(np.int64)
    return float(abs(np.sum(sizes[inside] * prefix[idx])))


def _lattice_profile_moments(
    lo: np.ndarray, hi: np.ndarray, coeffs: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and mean squared deviation of the lattice profile per grid point.

    ``lo``/``hi`` have shape (P, d).  Uses the closed form from pairwise
    region overlaps, exact up to float rounding.
    """
    counts = (hi - lo).astype(float)
    total = counts @ coeffs
    overlap = np.maximum(
        0,
        np.minimum(hi[:, :, None], hi[:, None, :]) - np.maximum(lo[:, :, None], lo[:, None, :]),
    ).astype(float)
    total_sq = np.einsum("i,pij,j->p", coeffs, overlap, coeffs)
    mean = total / n
    msd = total_sq / n - mean**2
    return mean, np.maximum(msd, 0.0)


def projection_surface(
    series,
    layout: TransectLayout,
    grid: ParamGrid,
    direction,
    cov: CovModel,
    beta: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Weighted projection objectives for every grid point.

    Returns ``(objective, raw, msd, n_skipped)`` where ``raw`` holds the
    unweighted objectives, ``msd`` the lattice variance of each signal
    profile, and ``objective = raw * msd^-beta`` (NaN at skipped points).
    Points whose profile is constant on the lattice are skipped when
    ``beta > 0`` (the weight is undefined there).
    """
    x = _as_matrix(series)
    d, n = x.shape
    if layout.d != d or layout.n != n:
        raise ValueError("series shape does not match layout")
    coeffs = _profile_coefficients(direction, cov)
    start, end = change_map_table(layout, grid.points)
    lo, hi = region_bounds(start, end, n)
    y = project_series(x, direction, cov)
    centered = y - y.mean()
    prefix = np.concatenate([[0.0], np.cumsum(centered)])
    raw = np.abs((prefix[hi] - prefix[lo]) @ coeffs)
    mean, msd = _lattice_profile_moments(lo, hi, coeffs, n)
    scale = msd + mean**2
    constant = msd <= CONST_PROFILE_RTOL * scale
    n_skipped = 0
    if beta > 0.0:
        values = np.where(constant, np.nan, raw * np.where(constant, 1.0, msd) ** (-beta))
        n_skipped = int(constant.sum())
    else:
        values = raw
    return values, raw, msd, n_skipped


def t_projection(
    series,
    grid: ParamGrid,
    layout: TransectLayout,
    direction,
    cov: CovModel,
    sigma: float,
    weights: WeightSpec | None = None,
) -> StatMax:
    """Grid maximum of the (optionally weighted) projection statistic.

    ``sigma`` is the long-run standard deviation of the projected errors; the
    reported value is the maximal weighted objective divided by
    ``sqrt(n) * sigma``.  Under an active weight, constant-profile grid
    points are skipped and counted in ``n_skipped``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be strictly positive")
    if weights is not None and weights.scheme == "multivariate_componentwise":
        raise ValueError("componentwise weights do not apply to the projection statistic")
    beta = weights.beta if weights is not None and weights.scheme == "projection" else 0.0
    x = _as_matrix(series)
    n = x.shape[1]
    values, _, _, n_skipped = projection_surface(x, layout, grid, direction, cov, beta=beta)
    k = _argmax_finite(values)
    scale = 1.0 / (math.sqrt(n) * sigma)
    return StatMax(
        value=float(values[k] * scale),
        argmax=grid.points[k],
        argmax_index=k,
        surface=values * scale,
        n_skipped=n_skipped,
    )
