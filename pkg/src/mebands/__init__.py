"""Mean excess plots with Monte-Carlo confidence bands for tail-domain detection."""

from .bands import (
    ConfidenceBand,
    DetectConfig,
    Verdict,
    band_frechet_finite_var,
    band_frechet_infinite_var,
    band_gumbel,
    band_weibull,
    build_band,
    contains_line,
    detect,
    symmetric_alpha_split,
)
from .errors import DataError, MEBandsError, NumericError
from .estimators import Method, estimate, estimator_path, hill, moment, pickands
from .quantiles import FORMAT_VERSION, QuantileCase, QuantileProvider, QuantileRequest, QuantileTable, mc_quantile
from .sample import (
    PlotCase,
    ReferenceLine,
    ScaledMEPlot,
    SortedSample,
    empirical_me,
    gpd_me,
    me_plot_raw,
    reference_line,
    scaled_plot,
    sort_descending,
)
from .stochastic import Family, Seed, brownian_bridge_path, sample_family, sample_gpd, sample_stable

__version__ = "0.1.0"

__all__ = [
    "ConfidenceBand",
    "DetectConfig",
    "Verdict",
    "band_frechet_finite_var",
    "band_frechet_infinite_var",
    "band_gumbel",
    "band_weibull",
    "build_band",
    "contains_line",
    "detect",
    "symmetric_alpha_split",
    "DataError",
    "MEBandsError",
    "NumericError",
    "Method",
    "estimate",
    "estimator_path",
    "hill",
    "moment",
    "pickands",
    "FORMAT_VERSION",
    "QuantileCase",
    "QuantileProvider",
    "QuantileRequest",
    "QuantileTable",
    "mc_quantile",
    "PlotCase",
    "ReferenceLine",
    "ScaledMEPlot",
    "SortedSample",
    "empirical_me",
    "gpd_me",
    "me_plot_raw",
    "reference_line",
    "scaled_plot",
    "sort_descending",
    "Family",
    "Seed",
    "brownian_bridge_path",
    "sample_family",
    "sample_gpd",
    "sample_stable",
]
