"""Factor-adjusted spectral clustering for mixtures with latent factor dependence."""

from .analysis import (
    assumption_report,
    mislabeling,
    optimal_bayes_labels,
    random_guess_baseline,
    scree,
    snr_report,
    spectral_conditions,
)
from .clustering import (
    ClusteringResult,
    FascConfig,
    fasc,
    kmeans_raw,
    spectral_cluster,
    spectral_cluster_crossfit,
)
from .dataset import CleaningRule, Dataset, FactorMixtureSpec, generate, generate_paper_scenario, load_csv
from .errors import FascError, IngestError, NumericalError, ValidationError
from .kmeans import KMeansConfig
from .numerics import SpectralBasis, top_eigen, top_right_singular

__version__ = "0.1.0"

__all__ = [
    "CleaningRule", "ClusteringResult", "Dataset", "FactorMixtureSpec", "FascConfig", "FascError",
    "IngestError", "KMeansConfig", "NumericalError", "SpectralBasis", "ValidationError",
    "assumption_report", "fasc", "generate", "generate_paper_scenario", "kmeans_raw",
    "load_csv", "mislabeling", "optimal_bayes_labels", "random_guess_baseline", "scree", "snr_report",
    "spectral_cluster", "spectral_cluster_crossfit", "spectral_conditions", "top_eigen",
    "top_right_singular",
]
