"""Power and sample-size calculators for completely randomized and rerandomized
two-arm experiments, using the one-sided test of ``H0: tau = 0`` against
``tau > 0``.

A two-sided level-alpha test is bounded by the one-sided test at ``alpha / 2``;
pass that level explicitly when a two-sided bound is wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError, InfeasibleError
from .mixture import (
    DEFAULT_DRAWS,
    DEFAULT_SEED,
    Method,
    MixtureLaw,
    TruncationSpec,
    normal_quantile,
    normal_survival,
)
from .moments import DesignSpec, OutcomeMoments, VarianceSummary, summarize


@dataclass(frozen=True)
class MonteCarloSettings:
    method: Method = "monte_carlo"
    draws: int = DEFAULT_DRAWS
    seed: int = DEFAULT_SEED

    def law(self, rho2: float, trunc: TruncationSpec) -> MixtureLaw:
        return MixtureLaw(rho2, trunc, self.draws, self.seed)


DEFAULT_MC = MonteCarloSettings()


@dataclass(frozen=True)
class PowerQuery:
    moments: OutcomeMoments
    design: DesignSpec
    tau: float
    n: float

    def __post_init__(self) -> None:
        if not self.n >= 2:
            raise DomainError(f"sample size must be at least 2, got {self.n!r}")


@dataclass(frozen=True)
class SampleSizeQuery:
    moments: OutcomeMoments
    design: DesignSpec
    tau: float
    gamma: float

    def __post_init__(self) -> None:
        if self.tau == 0:
            raise InfeasibleError("no sample size detects a zero average effect")
        if not self.gamma < 1.0:
            raise DomainError(f"target power must be below 1, got {self.gamma!r}")
        if self.gamma < self.design.alpha:
            raise DomainError(
                f"target power {self.gamma!r} must be at least the significance level {self.design.alpha!r}"
            )


@dataclass(frozen=True)
class PowerResult:
    power: float
    quantile_used: float
    summary: VarianceSummary
    mc: MonteCarloSettings | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)


# ----------------------------------------------------------------------------
# core formulas on a variance summary and the scaled effect tau * sqrt(N)
# ----------------------------------------------------------------------------


def rerand_power_from_summary(
    s: VarianceSummary,
    trunc: TruncationSpec,
    alpha: float,
    effect: float,
    mc: MonteCarloSettings = DEFAULT_MC,
) -> tuple[float, float]:
    """Asymptotic rerandomization power at ``effect = tau * N**0.5``.

    Returns ``(power, nu_{1-alpha}(r2_tilde))``.
    """
    nu = mc.law(s.r2_tilde, trunc).quantile(1.0 - alpha, mc.method)
    x = (nu * math.sqrt(s.v_tilde) - effect) / math.sqrt(s.v)
    return mc.law(s.r2, trunc).survival(x, mc.method), nu


def rand_power_from_summary(s: VarianceSummary, alpha: float, effect: float) -> tuple[float, float]:
    z = normal_quantile(1.0 - alpha)
    return normal_survival((z * math.sqrt(s.v_tilde) - effect) / math.sqrt(s.v)), z


def _warnings(s: VarianceSummary, gamma: float | None = None) -> tuple[str, ...]:
    notes = []
    if gamma is not None and gamma < 0.5 and s.conservative:
        notes.append(
            "target power below 0.5 with conservative variance estimation: "
            "rerandomization may need more units than complete randomization"
        )
    return tuple(notes)


def power_rerand(q: PowerQuery, mc: MonteCarloSettings = DEFAULT_MC) -> PowerResult:
    s = summarize(q.moments, q.design)
    power, nu = rerand_power_from_summary(s, q.design.trunc, q.design.alpha, q.tau * math.sqrt(q.n), mc)
    return PowerResult(power, nu, s, mc)


def power_rand(q: PowerQuery) -> PowerResult:
    s = summarize(q.moments, q.design)
    power, z = rand_power_from_summary(s, q.design.alpha, q.tau * math.sqrt(q.n))
    return PowerResult(power, z, s)


def _sample_size(numerator: float, tau: float) -> float:
    # numerator 0 happens at gamma = alpha with V_tilde = V: no units are needed
    if numerator < 0:
        raise InfeasibleError("target power is not reachable: the quantile difference is negative")
    return (numerator / tau) ** 2


def _rerand_numerator(s: VarianceSummary, trunc: TruncationSpec, alpha: float, gamma: float, mc: MonteCarloSettings) -> float:
    nu_alpha = mc.law(s.r2_tilde, trunc).quantile(1.0 - alpha, mc.method)
    nu_gamma = mc.law(s.r2, trunc).quantile(1.0 - gamma, mc.method)
    return nu_alpha * math.sqrt(s.v_tilde) - nu_gamma * math.sqrt(s.v)


def _rand_numerator(s: VarianceSummary, alpha: float, gamma: float) -> float:
    return normal_quantile(1.0 - alpha) * math.sqrt(s.v_tilde) - normal_quantile(1.0 - gamma) * math.sqrt(s.v)


def samplesize_rerand(q: SampleSizeQuery, mc: MonteCarloSettings = DEFAULT_MC) -> float:
    """Total sample size reaching power ``gamma`` under rerandomization (not rounded)."""
    s = summarize(q.moments, q.design)
    return _sample_size(_rerand_numerator(s, q.design.trunc, q.design.alpha, q.gamma, mc), q.tau)


def samplesize_rand(q: SampleSizeQuery) -> float:
    """Total sample size reaching power ``gamma`` under complete randomization (not rounded)."""
    s = summarize(q.moments, q.design)
    return _sample_size(_rand_numerator(s, q.design.alpha, q.gamma), q.tau)


def ratio_from_summary(
    s: VarianceSummary,
    trunc: TruncationSpec,
    alpha: float,
    gamma: float,
    mc: MonteCarloSettings = DEFAULT_MC,
) -> float:
    if not alpha <= gamma < 1.0:
        raise DomainError(f"target power must lie in [alpha, 1), got {gamma!r}")
    denominator = _rand_numerator(s, alpha, gamma)
    if denominator == 0:
        raise InfeasibleError("complete-randomization sample size is zero; the ratio is undefined")
    return (_rerand_numerator(s, trunc, alpha, gamma, mc) / denominator) ** 2


def samplesize_ratio(
    moments: OutcomeMoments,
    design: DesignSpec,
    gamma: float,
    mc: MonteCarloSettings = DEFAULT_MC,
) -> float:
    """``N_rr / N_cr`` for target power ``gamma``; free of ``tau``."""
    return ratio_from_summary(summarize(moments, design), design.trunc, design.alpha, gamma, mc)


def type1_errors(
    moments: OutcomeMoments,
    design: DesignSpec,
    mc: MonteCarloSettings = DEFAULT_MC,
) -> tuple[float, float]:
    """Asymptotic actual sizes ``(alpha_rr, alpha_cr)`` of the nominal level-alpha tests."""
    s = summarize(moments, design)
    alpha_rr, _ = rerand_power_from_summary(s, design.trunc, design.alpha, 0.0, mc)
    alpha_cr, _ = rand_power_from_summary(s, design.alpha, 0.0)
    return alpha_rr, alpha_cr


def crossing_threshold_from_summary(
    s: VarianceSummary,
    trunc: TruncationSpec,
    alpha: float,
    mc: MonteCarloSettings = DEFAULT_MC,
) -> float:
    """Scaled effect ``nu_{1-alpha}(r2_tilde) * sqrt(v_tilde)`` (that is, ``tau * sqrt(N)``)."""
    return mc.law(s.r2_tilde, trunc).quantile(1.0 - alpha, mc.method) * math.sqrt(s.v_tilde)


def power_crossing_threshold(
    moments: OutcomeMoments,
    design: DesignSpec,
    n: float,
    mc: MonteCarloSettings = DEFAULT_MC,
) -> float:
    """Effect size above which rerandomization is guaranteed at least as powerful."""
    s = summarize(moments, design)
    return crossing_threshold_from_summary(s, design.trunc, design.alpha, mc) / math.sqrt(n)


def sample_size_warnings(moments: OutcomeMoments, design: DesignSpec, gamma: float) -> tuple[str, ...]:
    return _warnings(summarize(moments, design), gamma)
