"""Finite-population simulation of completely randomized and rerandomized experiments."""

from .design import Assignment, default_max_draws, mahalanobis, rerandomize, treated_distances
from .harness import (
    DispersionTable,
    EnumerationResult,
    SimConfig,
    SimResult,
    dispersion_probe,
    empirical_power,
    enumerate_design,
    generate_population,
    standardized_estimates,
)
from .inference import Decision, Estimates, QuantileTable, estimate, quantile_table, run_test
from .population import (
    LinearGaussian,
    MultiplicativeHeterogeneity,
    PopulationMoments,
    PotentialOutcomesTable,
    linear_gaussian_population,
    multiplicative_population,
    population_moments,
)

__all__ = [
    "Assignment",
    "Decision",
    "DispersionTable",
    "EnumerationResult",
    "Estimates",
    "LinearGaussian",
    "MultiplicativeHeterogeneity",
    "PopulationMoments",
    "PotentialOutcomesTable",
    "QuantileTable",
    "SimConfig",
    "SimResult",
    "default_max_draws",
    "dispersion_probe",
    "empirical_power",
    "enumerate_design",
    "estimate",
    "generate_population",
    "linear_gaussian_population",
    "mahalanobis",
    "multiplicative_population",
    "population_moments",
    "quantile_table",
    "rerandomize",
    "run_test",
    "standardized_estimates",
    "treated_distances",
]
