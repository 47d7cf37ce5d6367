"""Power and sample-size calculations for rerandomized experiments."""

from .calculators import (
    DEFAULT_MC,
    MonteCarloSettings,
    PowerQuery,
    PowerResult,
    SampleSizeQuery,
    power_crossing_threshold,
    power_rand,
    power_rerand,
    samplesize_rand,
    samplesize_ratio,
    samplesize_rerand,
    type1_errors,
)
from .errors import (
    AcceptanceFailure,
    ConfigurationError,
    DegenerateVarianceError,
    DomainError,
    InfeasibleError,
    RerandPowerError,
)
from .mixture import (
    MixtureLaw,
    TruncationSpec,
    density_L,
    mixture_cdf,
    mixture_quantile,
    mixture_quantiles,
    mixture_survival,
    sample_L,
    threshold_from_acceptance,
)
from .moments import DesignSpec, OutcomeMoments, VarianceSummary, summarize, true_variance, variance_limit

__version__ = "0.1.0"

__all__ = [
    "AcceptanceFailure",
    "ConfigurationError",
    "DEFAULT_MC",
    "DegenerateVarianceError",
    "DesignSpec",
    "DomainError",
    "InfeasibleError",
    "MixtureLaw",
    "MonteCarloSettings",
    "OutcomeMoments",
    "PowerQuery",
    "PowerResult",
    "RerandPowerError",
    "SampleSizeQuery",
    "TruncationSpec",
    "VarianceSummary",
    "density_L",
    "mixture_cdf",
    "mixture_quantile",
    "mixture_quantiles",
    "mixture_survival",
    "power_crossing_threshold",
    "power_rand",
    "power_rerand",
    "samplesize_rand",
    "samplesize_ratio",
    "samplesize_rerand",
    "sample_L",
    "summarize",
    "threshold_from_acceptance",
    "true_variance",
    "type1_errors",
    "variance_limit",
]
