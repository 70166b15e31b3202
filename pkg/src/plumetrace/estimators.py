"""Scikit-learn style front end for the source estimators.

Both locators accept the series in the usual samples-by-features orientation
(one row per time point, one column per transect), validate it against the
layout, and expose the fitted source, the statistic surface and the fitted
change regions through trailing-underscore attributes.  Constructor
parameters are stored untouched, so ``get_params``/``set_params``/``clone``
work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import lrv
from .errors import NumericalError
from .estimate import estimate_multivariate, estimate_projection, reduce_surface
from .geometry import ParamGrid, TransectLayout, linear_change_map
from .stats import CovModel, WeightSpec, project_series
from .validation import check_cov, check_direction, series_from_samples

__all__ = ["MultivariateSourceLocator", "ProjectionSourceLocator"]


class _BaseSourceLocator(BaseEstimator):
    def __init__(self, layout=None, grid=None, cov="estimate"):
        self.layout = layout
        self.grid = grid
        self.cov = cov

    def _validate(self, X) -> np.ndarray:
        if not isinstance(self.layout, TransectLayout):
            raise ValueError("a TransectLayout must be supplied before fitting")
        if not isinstance(self.grid, ParamGrid):
            raise ValueError("a ParamGrid must be supplied before fitting")
        return series_from_samples(X, self.layout)

    def _resolve_cov(self, x: np.ndarray) -> CovModel:
        if self.cov == "estimate":
            return lrv.diag_cov(x)
        return check_cov(self.cov, x.shape[0])

    def _finish(self, theta, surface):
        self.theta_ = theta
        self.surface_ = surface
        self.heatmap_ = reduce_surface(surface)
        self.change_map_ = linear_change_map(self.layout, theta)
        self.near_ties_ = surface.near_ties
        return self

    def predict(self, X=None) -> np.ndarray:
        """Fitted change-region boundaries, one (start, end) row per transect."""
        if not hasattr(self, "change_map_"):
            raise ValueError("estimator is not fitted yet; call fit first")
        return np.column_stack([self.change_map_.start, self.change_map_.end])

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).predict()


class MultivariateSourceLocator(_BaseSourceLocator):
    """Localize the source by maximizing the multivariate region-sum form.

    Parameters
    ----------
    layout : TransectLayout
        Flight geometry the columns of ``X`` correspond to.
    grid : ParamGrid
        Strict search grid over candidate sources and opening angles.
    cov : "estimate" or CovModel
        Long-run covariance; ``"estimate"`` fits a diagonal model from
        componentwise residuals.
    beta : float
        Componentwise weight exponent in [0, 1/2]; 0 disables weighting.
    """

    def __init__(self, layout=None, grid=None, cov="estimate", beta=0.0):
        super().__init__(layout=layout, grid=grid, cov=cov)
        self.beta = beta

    def fit(self, X, y=None):
        x = self._validate(X)
        cov = self._resolve_cov(x)
        weights = None
        if self.beta:
            weights = WeightSpec(beta=self.beta, scheme="multivariate_componentwise")
        theta, surface = estimate_multivariate(x, self.layout, self.grid, cov, weights)
        self.cov_ = cov
        return self._finish(theta, surface)


class ProjectionSourceLocator(_BaseSourceLocator):
    """Localize the source by maximizing the normalized projection objective.

    Requires the assumed change direction across transects (relative
    magnitudes only; the scale is irrelevant).  ``transform`` exposes the
    projected univariate series for inspection.
    """

    def __init__(self, layout=None, grid=None, cov="estimate", direction=None):
        super().__init__(layout=layout, grid=grid, cov=cov)
        self.direction = direction

    def fit(self, X, y=None):
        x = self._validate(X)
        direction = check_direction(self.direction, x.shape[0])
        cov = self._resolve_cov(x)
        theta, surface = estimate_projection(x, self.layout, self.grid, direction, cov)
        self.cov_ = cov
        try:
            self.sigma_ = float(np.sqrt(lrv.projected_sigma(x, direction, cov).sigma2))
        except NumericalError:
            self.sigma_ = None  # degenerate residuals (e.g. noise-free input)
        return self._finish(theta, surface)

    def transform(self, X) -> np.ndarray:
        """Series collapsed onto the standardized direction, shape (n, 1)."""
        if not hasattr(self, "cov_"):
            raise ValueError("estimator is not fitted yet; call fit first")
        x = series_from_samples(X, self.layout)
        direction = check_direction(self.direction, x.shape[0])
        return project_series(x, direction, self.cov_)[:, None]
