"""Exception hierarchy shared by the calculators, simulator and CLI."""


class RerandPowerError(Exception):
    """Base class for all package errors."""


class DomainError(RerandPowerError, ValueError):
    """An input lies outside the domain where a quantity is defined."""


class DegenerateVarianceError(DomainError):
    """The true variance of the mean difference is not positive."""


class InfeasibleError(DomainError):
    """A sample-size or power target cannot be met."""


class ConfigurationError(DomainError):
    """A simulation configuration asks for moments no population can have."""


class AcceptanceFailure(RerandPowerError, RuntimeError):
    """Rerandomization did not find a balanced assignment within its draw budget."""

    def __init__(self, message: str, *, draws: int, threshold: float, min_distance: float):
        super().__init__(message)
        self.draws = draws
        self.threshold = threshold
        self.min_distance = min_distance
