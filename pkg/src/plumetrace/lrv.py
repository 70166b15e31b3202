"""Covariance plug-ins: epidemic pre-fit, residuals, flat-top long-run variance.

Estimating the long-run covariance directly from the observations would be
contaminated by the change itself, so every variance estimate in this package
is computed from residuals of a componentwise epidemic fit: locate the best
single elevated interval per component, subtract the two-level mean, then
feed the residuals to a flat-top tapered autocovariance estimator with
automatic bandwidth selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .stats import CovModel, _as_matrix, project_series

__all__ = [
    "EpidemicFit",
    "LrvEstimate",
    "epidemic_fit",
    "residuals",
    "flat_top_taper",
    "flat_top_lrv",
    "diag_cov",
    "projected_sigma",
]

# Floor for flat-top estimates, relative to the lag-0 autocovariance.  The
# flat-top window is not positive definite, and downstream code divides by
# these variances.
FLOOR_RTOL = 1e-8

# Default constants of the automatic bandwidth rule; both can be overridden
# per call.
BANDWIDTH_THRESHOLD_SCALE = 2.0


@dataclass(frozen=True)
class EpidemicFit:
    """Best single elevated interval of a univariate series.

    ``start``/``end`` are the 1-based boundary pair ``(f, g)`` with
    ``1 <= start < end <= n``; the elevated region covers 1-based times
    ``start+1 .. end``, i.e. the 0-based slice ``start:end``.
    """

    start: int
    end: int
    baseline: float
    shift: float

    @property
    def region(self) -> slice:
        return slice(self.start, self.end)


def epidemic_fit(x) -> EpidemicFit:
    """Fit the interval maximizing the absolute centered region sum.

    Equivalent to the exhaustive search over all boundary pairs but computed
    in O(n) from the prefix sums of the centered series: the optimum pairs the
    prefix minimum with the prefix maximum.  Ties resolve to the
    lexicographically smallest pair.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("epidemic fit expects a univariate series")
    n = x.shape[0]
    if n < 3:
        raise ValueError("epidemic fit requires at least 3 observations")
    prefix = np.cumsum(x - x.mean())  # prefix[k-1] = P(k) for k = 1..n
    vmin = prefix.min()
    vmax = prefix.max()
    if vmin == vmax:
        start, end = 1, 2
    else:
        start, end = _extremal_pair(prefix, vmin, vmax)
    baseline_mass = x[:start].sum() + x[end:].sum()
    baseline = baseline_mass / (start + n - end)
    shift = x[start:end].mean() - baseline
    return EpidemicFit(start=start, end=end, baseline=float(baseline), shift=float(shift))


def _extremal_pair(prefix: np.ndarray, vmin: float, vmax: float) -> tuple[int, int]:
    """Lexicographically smallest 1-based (f, g) with {P(f), P(g)} = {vmin, vmax}."""
    mins = np.flatnonzero(prefix == vmin) + 1
    maxs = np.flatnonzero(prefix == vmax) + 1
    best = None
    for first, second in ((mins, maxs), (maxs, mins)):
        later = second[second > first[0]]
        if later.size:
            cand = (int(first[0]), int(later[0]))
            if best is None or cand < best:
                best = cand
    # vmin != vmax guarantees one ordering exists
    assert best is not None
    return best


def residuals(x, fit: EpidemicFit) -> np.ndarray:
    """Series minus the fitted two-level mean."""
    x = np.asarray(x, dtype=float)
    out = x - fit.baseline
    out[fit.region] -= fit.shift
    return out


def flat_top_taper(u) -> np.ndarray:
    """Trapezoidal taper: 1 on [0, 1/2], linear to 0 at 1, 0 beyond."""
    u = np.abs(np.asarray(u, dtype=float))
    return np.where(u <= 0.5, 1.0, np.where(u <= 1.0, 2.0 * (1.0 - u), 0.0))


@dataclass(frozen=True)
class LrvEstimate:
    """A long-run variance with the bandwidth that produced it."""

    sigma2: float
    bandwidth: int
    floored: bool = False


def _autocovariance(e: np.ndarray, lag: int) -> float:
    n = e.shape[0]
    return float(e[: n - lag] @ e[lag:]) / n


def flat_top_lrv(
    e,
    *,
    bandwidth: int | None = None,
    threshold_scale: float = BANDWIDTH_THRESHOLD_SCALE,
    run_length: int | None = None,
) -> LrvEstimate:
    """Flat-top tapered long-run variance with automatic bandwidth.

    The bandwidth ``m`` is the smallest lag whose next ``run_length`` sample
    autocorrelations all fall below ``threshold_scale * sqrt(log10(n)/n)``;
    the estimate then sums tapered biased autocovariances over lags up to
    ``2m``.  Results are floored at ``FLOOR_RTOL`` times the lag-0
    autocovariance (the window is not positive definite), with the ``floored``
    flag set when the floor binds.
    """
    e = np.asarray(e, dtype=float)
    if e.ndim != 1:
        raise ValueError("long-run variance expects a univariate series")
    n = e.shape[0]
    if n < 20:
        raise ValueError("long-run variance requires at least 20 observations")
    centered = e - e.mean()
    gamma0 = _autocovariance(centered, 0)
    if gamma0 == 0.0:
        raise NumericalError("series is constant; long-run variance undefined")

    if run_length is None:
        run_length = max(5, math.ceil(math.sqrt(math.log10(n))))
    if bandwidth is None:
        threshold = threshold_scale * math.sqrt(math.log10(n) / n)
        m_cap = min((n - 1) // 2, n - 1 - run_length, math.ceil(3.0 * math.sqrt(n)))
        acov = [gamma0]

        def rho(k: int) -> float:
            while len(acov) <= k:
                acov.append(_autocovariance(centered, len(acov)))
            return acov[k] / gamma0

        bandwidth = m_cap
        for m in range(0, m_cap + 1):
            if all(abs(rho(m + j)) < threshold for j in range(1, run_length + 1)):
                bandwidth = m
                break
    elif bandwidth < 0 or 2 * bandwidth > n - 1:
        raise ValueError("bandwidth out of range")

    sigma2 = gamma0
    if bandwidth > 0:
        lags = np.arange(1, 2 * bandwidth + 1)
        taper = flat_top_taper(lags / (2.0 * bandwidth))
        acovs = np.array([_autocovariance(centered, int(k)) for k in lags])
        sigma2 = gamma0 + 2.0 * float(taper @ acovs)

    floor = FLOOR_RTOL * gamma0
    floored = sigma2 < floor
    return LrvEstimate(sigma2=float(max(sigma2, floor)), bandwidth=int(bandwidth), floored=bool(floored))


def component_fits(series) -> list[EpidemicFit]:
    """Epidemic pre-fit of every component of a d x n matrix."""
    x = _as_matrix(series)
    return [epidemic_fit(row) for row in x]


def component_residuals(series) -> np.ndarray:
    """Residual matrix from the componentwise epidemic pre-fits."""
    x = _as_matrix(series)
    return np.vstack([residuals(row, epidemic_fit(row)) for row in x])


def diag_cov(series, **lrv_kwargs) -> CovModel:
    """Diagonal long-run covariance from per-component residual variances."""
    resid = component_residuals(series)
    variances = np.array([flat_top_lrv(row, **lrv_kwargs).sigma2 for row in resid])
    return CovModel(kind="diagonal", values=variances, provenance="estimated")


def projected_sigma(series, direction, cov: CovModel, **lrv_kwargs) -> LrvEstimate:
    """Long-run variance of the projected residuals.

    Residuals come from the componentwise epidemic pre-fit (not from a fitted
    plume), mirroring the construction of the diagonal covariance; they are
    then collapsed onto the standardized direction before the flat-top step.
    """
    resid = component_residuals(series)
    projected = project_series(resid, direction, cov)
    return flat_top_lrv(projected, **lrv_kwargs)
