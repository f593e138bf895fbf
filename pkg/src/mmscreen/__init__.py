"""Screening of spatially variable features with a quasi-likelihood mixture test.

The main entry points are :func:`screen_all` (per-feature statistics),
:func:`run_knockoff_filter` (statistics plus an FDR-controlling threshold)
and :func:`cluster_selected` (PCA + k-means on the selected features).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DataError,
    DispersionError,
    DomainError,
    MMScreenError,
    NumericalError,
)
from .expression import ExpressionMatrix
from .knockoff import KnockoffRun, generate_knockoffs, knockoff_threshold, run_knockoff_filter
from .mmtest import FeatureStatistic, MMConfig, ScreenResult, mm_statistic, screen_all
from .neighborhood import AuxiliarySpace, NeighborIndex, build_neighbors, neighborhood_size, working_dispersion
from .postcluster import adjusted_rand, cluster_selected, hamming_error, kmeans, pca_scores
from .qlik import QUASI_NEGBINOMIAL, QUASI_POISSON, VarianceModel, custom_model, get_model, quasi_loglik
from .simgen import GenSpec, LayoutSpec, auprc, gen_expression, gen_layout, screening_metrics

__all__ = [
    "__version__",
    "AuxiliarySpace",
    "ConfigurationError",
    "DataError",
    "DispersionError",
    "DomainError",
    "ExpressionMatrix",
    "FeatureStatistic",
    "GenSpec",
    "KnockoffRun",
    "LayoutSpec",
    "MMConfig",
    "MMScreenError",
    "NeighborIndex",
    "NumericalError",
    "QUASI_NEGBINOMIAL",
    "QUASI_POISSON",
    "ScreenResult",
    "VarianceModel",
    "adjusted_rand",
    "auprc",
    "build_neighbors",
    "cluster_selected",
    "custom_model",
    "gen_expression",
    "gen_layout",
    "generate_knockoffs",
    "get_model",
    "hamming_error",
    "kmeans",
    "knockoff_threshold",
    "mm_statistic",
    "neighborhood_size",
    "pca_scores",
    "quasi_loglik",
    "run_knockoff_filter",
    "screen_all",
    "screening_metrics",
    "working_dispersion",
]
