"""Minimum kernel discrepancy estimation.

Kernel discrepancies (MMD, kernel Stein discrepancy, method-of-moments
norm), estimators that minimise them over parametric models, and plug-in
sandwich covariances with chi-squared confidence sets.
"""

from .asymptotics import (
    AsymptoticCovariance,
    ConfidenceSet,
    GMMPairing,
    SteinPairing,
    asymptotic_covariance,
    confidence_set,
    gamma_hat,
    sandwich,
    sigma_hat,
)
from .data import Dataset, load_csv, load_data, load_json, save_csv, split_replicates
from .discrepancy import (
    DiscrepancyValue,
    WitnessFunction,
    gmm_discrepancy_squared,
    ksd_squared,
    mmd_squared,
    witness_eval,
)
from .estimation import (
    EstimateResult,
    estimate_gmm,
    estimate_min_ksd_expfam,
    estimate_mmd_pushforward,
    minimize_general,
)
from .kernels import (
    EmbeddedKernel,
    FeatureKernel,
    GaussianRBF,
    IdentityFeatures,
    InverseMultiquadric,
    RandomFourierFeatures,
    SteinKernel,
    gram,
    median_heuristic,
)
from .models import (
    Box,
    ExponentialFamily,
    PushforwardModel,
    ScoreModel,
    gaussian_location_scale_instance,
    gaussian_mean_sd_instance,
    location_model,
    moment_to_natural,
    natural_to_moment,
)
from .simulation import CoverageReport, coverage_simulation
from .special import chi2_cdf, chi2_quantile
from .vstat import (
    BivariateStatistic,
    conditional_mean_variance,
    row_means,
    u_statistic,
    v_statistic,
    vu_parts,
)

__version__ = "0.1.0"
