"""Collective spectral density estimation and clustering for time-series panels."""

from .basis import (
    BasisMatrix,
    BasisSpec,
    PenaltyMatrix,
    difference_penalty,
    eval_basis,
    penalty_for,
    second_derivative_penalty,
)
from .baselines import (
    EstimatorKind,
    SdfEstimate,
    estimate_ncsde,
    estimate_nsde,
    estimate_ps,
    estimate_sps,
    estimate_tsvd_nsde,
    estimate_tsvd_ps,
)
from .cluster import (
    ClusterAssignment,
    Dendrogram,
    cut,
    elbow,
    euclidean_distances,
    select_K,
    ward_linkage,
    wss_curve,
)
from .engine import (
    Coefficients,
    FitConfig,
    FitResult,
    aic,
    canonicalize,
    degrees_of_freedom,
    fit,
    initialize,
    log_sdf,
    penalized_objective,
    sdf,
    update_lambda,
    whittle_deviance,
)
from .estimators import CollectiveSpectralDensity
from .metrics import adjusted_rand_index, canonical_angle
from .simulate import (
    ArModel,
    MixtureDesign,
    StudyReport,
    ar3_generate,
    generate_mixture,
    run_study,
    true_sdf,
)
from .spectral import (
    FrequencyGrid,
    PeriodogramSet,
    TimeSeriesSet,
    demean,
    fourier_grid,
    periodogram,
    read_time_series_csv,
    truncate_band,
)

__version__ = "0.1.0"
