"""plumetrace: gas-source localization from multivariate transect series.

Each flight transect is one component of a multivariate series; a candidate
source induces, through a triangular plume, one elevated region per component.
The package scores candidates with a multivariate region-sum statistic and a
projection statistic along an assumed change direction, calibrates both
against simulated Brownian-bridge null limits, and exposes grid estimators,
scikit-learn style locators and a CLI.
"""

from .estimate import (
    ReducedSurface,
    StatSurface,
    estimate_multivariate,
    estimate_projection,
    reduce_surface,
)
from .estimators import MultivariateSourceLocator, ProjectionSourceLocator
from .errors import DataFormatError, NumericalError, PlumetraceError
from .geometry import (
    ChangeMap,
    ParamGrid,
    PlumeParams,
    Transect,
    TransectLayout,
    build_grid,
    linear_change_map,
)
from .limits import (
    NullTable,
    mc_null_multivariate,
    mc_null_projection,
    p_value,
    simulate_bridge,
)
from .lrv import EpidemicFit, LrvEstimate, diag_cov, epidemic_fit, flat_top_lrv, projected_sigma, residuals
from .simulate import (
    SimDesign,
    contaminate_direction,
    delta_profile,
    gen_dataset,
    gen_errors,
    null_dataset,
    reference_design,
    reference_layout,
)
from .stats import (
    CovModel,
    MultiSeries,
    WeightSpec,
    jump_form_objective,
    multivariate_form,
    project_series,
    projection_objective,
    region_sum,
    signal_profile,
    t_multivariate,
    t_projection,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ChangeMap",
    "CovModel",
    "DataFormatError",
    "EpidemicFit",
    "LrvEstimate",
    "MultiSeries",
    "MultivariateSourceLocator",
    "NullTable",
    "NumericalError",
    "ParamGrid",
    "PlumeParams",
    "PlumetraceError",
    "ProjectionSourceLocator",
    "ReducedSurface",
    "SimDesign",
    "StatSurface",
    "Transect",
    "TransectLayout",
    "WeightSpec",
    "build_grid",
    "contaminate_direction",
    "delta_profile",
    "diag_cov",
    "epidemic_fit",
    "estimate_multivariate",
    "estimate_projection",
    "flat_top_lrv",
    "gen_dataset",
    "gen_errors",
    "jump_form_objective",
    "linear_change_map",
    "mc_null_multivariate",
    "mc_null_projection",
    "multivariate_form",
    "null_dataset",
    "p_value",
    "project_series",
    "projected_sigma",
    "projection_objective",
    "reduce_surface",
    "reference_design",
    "reference_layout",
    "region_sum",
    "residuals",
    "signal_profile",
    "simulate_bridge",
    "t_multivariate",
    "t_projection",
]
