"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .geometry import TransectLayout
from .stats import CovModel

__all__ = ["series_from_samples", "check_direction", "check_cov"]


def series_from_samples(X, layout: TransectLayout | None = None) -> np.ndarray:
    """Validate an (n_samples, d) array and return it as a (d, n) matrix.

    The public estimator API follows the samples-by-features convention
    (rows are time points); internally components are rows.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-d array of shape (n_samples, n_components)")
    if X.shape[0] < 4 or X.shape[1] < 1:
        raise ValueError("need at least 4 time points and one component")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    if layout is not None:
        if X.shape[1] != layout.d:
            raise ValueError(
                f"series has {X.shape[1]} components but the layout has {layout.d} transects"
            )
        if X.shape[0] != layout.n:
            raise ValueError(
                f"series has {X.shape[0]} time points but the layout declares {layout.n}"
            )
    return X.T.copy()


def check_direction(direction, d: int) -> np.ndarray:
    vec = np.asarray(direction, dtype=float)
    if vec.ndim != 1 or vec.shape[0] != d:
        raise ValueError(f"direction must be a vector of length {d}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("direction must be finite")
    if not np.any(vec != 0.0):
        raise ValueError("direction must have at least one nonzero entry")
    return vec


def check_cov(cov: CovModel, d: int) -> CovModel:
    if not isinstance(cov, CovModel):
        raise TypeError("expected a CovModel")
    if cov.d != d:
        raise ValueError(f"covariance dimension {cov.d} does not match {d} components")
    return cov
