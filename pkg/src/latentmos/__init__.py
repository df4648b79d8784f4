"""Latent-Gaussian aggregation of discrete opinion ratings.

Turns per-sample sets of 1..K ratings into representative scores (MOS,
N-lowest MOS, or the mean of a fitted quantized normal), evaluates scores
with LCC/SRCC/ppref, and simulates annotators for estimator checks.
"""

from latentmos.errors import InputError, UndefinedMetricError
from latentmos.latent import (
    FitConfig,
    FitResult,
    LatentParams,
    cdf_l1_distance,
    fit,
    fit_histogram,
    loss,
    loss_gradient,
    quantized_pmf,
)
from latentmos.metrics import (
    PreferenceAnnotation,
    PreferencePair,
    ScoredSample,
    lcc,
    ppref,
    screen_preferences,
    srcc,
)
from latentmos.normal import standard_normal_cdf, standard_normal_ppf
from latentmos.ratings import (
    EmpiricalStats,
    RatingSet,
    empirical_stats,
    mos,
    n_low_mos,
    rel_freq,
)
from latentmos.synth import SynthConfig, generate_dataset, sample_rating

__version__ = "0.1.0"

__all__ = [
    "EmpiricalStats",
    "FitConfig",
    "FitResult",
    "InputError",
    "LatentParams",
    "PreferenceAnnotation",
    "PreferencePair",
    "RatingSet",
    "ScoredSample",
    "SynthConfig",
    "UndefinedMetricError",
    "cdf_l1_distance",
    "empirical_stats",
    "fit",
    "fit_histogram",
    "generate_dataset",
    "lcc",
    "loss",
    "loss_gradient",
    "mos",
    "n_low_mos",
    "ppref",
    "quantized_pmf",
    "rel_freq",
    "sample_rating",
    "screen_preferences",
    "srcc",
    "standard_normal_cdf",
    "standard_normal_ppf",
]
