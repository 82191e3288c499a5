"""Depth-based trimmed means in R^d.

Data depths (Tukey, simplicial, spatial, projection, KDE-smoothed), the
trimmed-mean functional and its estimators, level-set geometry, Hadamard
derivative checks and a reproducible simulation harness.
"""

from .density import GaussianKDE, KdeModel, fit_kde, kde_eval, kde_sample, silverman_bandwidth
from .depth import (
    GridSpec,
    ProjectionDepth,
    SimplicialDepth,
    SmoothedDepth,
    SpatialDepth,
    TukeyDepth,
    depth_field,
    make_depth,
    projection_depth,
    simplicial_depth,
    smoothed_depth,
    spatial_depth,
    tukey_depth,
)
from .hadamard import (
    PerturbationPair,
    delta_epsilon,
    delta_limit,
    fd_convergence_check,
    functional_T,
    hadamard_derivative,
    nabla_epsilon,
)
from .level_geometry import (
    ChartError,
    ContourSet,
    RadialChart,
    check_H2,
    contour_marching_squares,
    jacobian_det_tau,
    radial_chart,
    radial_radius,
)
from .populations import beta22_sample
from .simulation import (
    SimConfig,
    SimResult,
    consistency_sweep,
    export_figure_data,
    run_replicate,
    run_simulation,
)
from .trimmed_mean import (
    DepthTrimmedMean,
    TrimmedMeanResult,
    population_reference,
    trimmed_mean_grid,
    trimmed_mean_mc,
)

__version__ = "0.1.0"

__all__ = [
    "ChartError",
    "ContourSet",
    "DepthTrimmedMean",
    "GaussianKDE",
    "GridSpec",
    "KdeModel",
    "PerturbationPair",
    "ProjectionDepth",
    "RadialChart",
    "SimConfig",
    "SimResult",
    "SimplicialDepth",
    "SmoothedDepth",
    "SpatialDepth",
    "TrimmedMeanResult",
    "TukeyDepth",
    "beta22_sample",
    "check_H2",
    "consistency_sweep",
    "contour_marching_squares",
    "delta_epsilon",
    "delta_limit",
    "depth_field",
    "export_figure_data",
    "fd_convergence_check",
    "fit_kde",
    "functional_T",
    "hadamard_derivative",
    "jacobian_det_tau",
    "kde_eval",
    "kde_sample",
    "make_depth",
    "nabla_epsilon",
    "population_reference",
    "projection_depth",
    "radial_chart",
    "radial_radius",
    "run_replicate",
    "run_simulation",
    "silverman_bandwidth",
    "simplicial_depth",
    "smoothed_depth",
    "spatial_depth",
    "trimmed_mean_grid",
    "trimmed_mean_mc",
    "tukey_depth",
]
