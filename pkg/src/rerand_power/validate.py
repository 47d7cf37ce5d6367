"""Named simulator-versus-analytic comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from scipy import stats

from .calculators import DEFAULT_MC, MonteCarloSettings, PowerQuery, power_rand, power_rerand
from .errors import ConfigurationError
from .mixture import DEFAULT_SEED, MixtureLaw, TruncationSpec
from .moments import DesignSpec
from .sim import (
    LinearGaussian,
    SimConfig,
    dispersion_probe,
    empirical_power,
    enumerate_design,
    generate_population,
    population_moments,
    standardized_estimates,
)


@dataclass(frozen=True)
class Check:
    name: str
    observed: float
    bound: float
    relation: str  # "<=" or ">="
    detail: str = ""

    @property
    def passed(self) -> bool:
        if self.relation == "<=":
            return self.observed <= self.bound
        return self.observed >= self.bound

    @property
    def margin(self) -> float:
        """Distance to the bound; positive when the check passes."""
        return self.bound - self.observed if self.relation == "<=" else self.observed - self.bound


@dataclass(frozen=True)
class ValidationReport:
    scenario: str
    settings: dict
    checks: tuple[Check, ...]
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table(self) -> str:
        lines = [f"{'check':<34} {'observed':>12} {'rel':>3} {'bound':>12} {'margin':>11}  status"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(
                f"{c.name:<34} {c.observed:>12.6g} {c.relation:>3} {c.bound:>12.6g} {c.margin:>11.4g}  {status}"
            )
        return "\n".join(lines)


def _analytic_power(sim: SimConfig, result, mc: MonteCarloSettings) -> float:
    m = result.moments.outcome_moments()
    design = DesignSpec(p1=sim.p1, trunc=sim.trunc, alpha=sim.alpha, estimator=sim.estimator)
    q = PowerQuery(m, design, result.moments.tau, sim.n)
    if sim.trunc.is_unconstrained:
        return power_rand(q).power
    return power_rerand(q, mc).power


def size_nominal(replications: int = 10_000, seed: int = DEFAULT_SEED, n: int = 1000, **_) -> ValidationReport:
    """tau = 0 and additive effects under complete randomization."""
    sim = SimConfig(
        n=n, n1=n // 2, generator=LinearGaussian(s1=1.0, s0=1.0),
        trunc=TruncationSpec.unconstrained(1), replications=replications, seed=seed,
    )
    r = empirical_power(sim)
    band = 3.0 * math.sqrt(sim.alpha * (1 - sim.alpha) / replications)
    checks = (
        Check("rejection rate upper", r.rejection_rate, sim.alpha + band, "<="),
        Check("rejection rate lower", r.rejection_rate, sim.alpha - band, ">="),
    )
    return ValidationReport("size-nominal", {"n": n, "replications": replications, "seed": seed}, checks,
                            {"rejection_rate": r.rejection_rate, "mc_se": r.mc_se})


def appendix_j_rerand(
    replications: int = 2000,
    seed: int = DEFAULT_SEED,
    n: int = 200,
    slack: float = 0.02,
    mc: MonteCarloSettings = DEFAULT_MC,
    workers: int = 1,
    **_,
) -> ValidationReport:
    """S1 = S0 = S_tau = 4, R^2 = 0.3, K = 10, p_a = 0.01 under the local alternative tau = 20 / sqrt(n)."""
    tau = 2.0 * math.sqrt(100.0 / n)
    sim = SimConfig(
        n=n, n1=n // 2, generator=LinearGaussian(s1=4.0, s0=4.0, s_tau=4.0, r2=0.3, tau=tau),
        trunc=TruncationSpec.from_acceptance(10, 0.01), replications=replications, seed=seed,
        quantile_draws=mc.draws,
    )
    r = empirical_power(sim, workers=workers)
    analytic = _analytic_power(sim, r, mc)
    bound = 3.0 * r.mc_se + slack
    checks = (Check("|empirical - analytic| power", abs(r.rejection_rate - analytic), bound, "<="),)
    return ValidationReport(
        "appendix-j-rerand", {"n": n, "tau": tau, "replications": replications, "seed": seed}, checks,
        {"empirical": r.rejection_rate, "analytic": analytic, "mc_se": r.mc_se,
         "acceptance_draws_mean": r.acceptance_draws_mean},
    )


def dispersive(
    seed: int = DEFAULT_SEED,
    draws: int = 1_000_000,
    rho2s: tuple[float, ...] = tuple(j / 10 for j in range(1, 10)),
    ks: tuple[int, ...] = (1, 5, 10, 50),
    pas: tuple[float, ...] = (0.001, 0.01, 0.1),
    bands: float = 3.0,
    **_,
) -> ValidationReport:
    """Every quantile gap of the mixture is at most the Normal gap, up to MC error."""
    checks = []
    worst = -math.inf
    for k in ks:
        for pa in pas:
            trunc = TruncationSpec.from_acceptance(k, pa)
            for rho2 in rho2s:
                table = dispersion_probe(MixtureLaw(rho2, trunc, draws, seed))
                worst = max(worst, float(table.difference.max()))
                checks.append(Check(f"violations K={k} pa={pa} rho2={rho2}", table.violations(bands), 0, "<="))
    return ValidationReport("dispersive", {"draws": draws, "seed": seed, "bands": bands}, tuple(checks),
                            {"largest_gap_difference": worst})


def type1_ordering(
    replications: int = 10_000,
    seed: int = DEFAULT_SEED,
    n: int = 100,
    **_,
) -> ValidationReport:
    """tau = 0 with heterogeneous effects (V_tilde > V), R^2 = 0.5, K = 2, p_a = 0.001."""
    gen = LinearGaussian(s1=4.0, s0=4.0, s_tau=4.0, r2=0.5)
    common = dict(n=n, n1=n // 2, generator=gen, replications=replications, seed=seed)
    rr = empirical_power(SimConfig(trunc=TruncationSpec.from_acceptance(2, 0.001), **common))
    cr = empirical_power(SimConfig(trunc=TruncationSpec.unconstrained(2), **common))
    combined = math.sqrt(rr.mc_se**2 + cr.mc_se**2)
    alpha = 0.05
    nominal_se = math.sqrt(alpha * (1 - alpha) / replications)
    checks = (
        Check("rerandomization size", rr.rejection_rate, alpha + 3 * nominal_se, "<="),
        Check("complete randomization size", cr.rejection_rate, alpha + 3 * nominal_se, "<="),
        Check("rr size - cr size", rr.rejection_rate - cr.rejection_rate, 3 * combined, "<="),
    )
    return ValidationReport("type1-ordering", {"n": n, "replications": replications, "seed": seed}, checks,
                            {"alpha_rr": rr.rejection_rate, "alpha_cr": cr.rejection_rate,
                             "mc_se_rr": rr.mc_se, "mc_se_cr": cr.mc_se})


def enumeration(
    replications: int = 4000,
    seed: int = DEFAULT_SEED,
    n: int = 12,
    **_,
) -> ValidationReport:
    """Exact power over all accepted assignments against the replication estimate."""
    sim = SimConfig(
        n=n, n1=n // 2, generator=LinearGaussian(s1=2.0, s0=2.0, s_tau=1.0, r2=0.5, tau=1.0),
        trunc=TruncationSpec.from_acceptance(2, 0.3), replications=replications, seed=seed,
    )
    pop = generate_population(sim)
    exact = enumerate_design(pop, sim)
    r = empirical_power(sim, pop)
    se = math.sqrt(exact.power * (1 - exact.power) / replications)
    checks = (
        Check("|MC - exact| power", abs(r.rejection_rate - exact.power), 3 * se, "<="),
        Check("|mean tau_hat - tau|", abs(exact.mean_tau_hat - exact.tau), 1e-10, "<="),
        Check("mean Neyman - var(tau_hat) * n", exact.mean_v_neyman - n * exact.var_tau_hat, 0.0, ">="),
    )
    return ValidationReport("enumeration", {"n": n, "replications": replications, "seed": seed}, checks,
                            {"exact": exact.power, "monte_carlo": r.rejection_rate,
                             "n_accepted": exact.n_accepted, "n_assignments": exact.n_assignments})


def shape(
    replications: int = 2000,
    seed: int = DEFAULT_SEED,
    n: int = 2000,
    level: float = 0.001,
    mc: MonteCarloSettings = DEFAULT_MC,
    **_,
) -> ValidationReport:
    """Two-sample KS test of standardized estimates against the limiting mixture."""
    sim = SimConfig(
        n=n, n1=n // 2, generator=LinearGaussian(s1=4.0, s0=4.0, s_tau=4.0, r2=0.3),
        trunc=TruncationSpec.from_acceptance(10, 0.01), replications=replications, seed=seed,
    )
    pop = generate_population(sim)
    z = standardized_estimates(sim, pop)
    r2 = population_moments(pop, sim.p1).r2
    ref = MixtureLaw(r2, sim.trunc, mc.draws, mc.seed).draws()
    pvalue = float(stats.ks_2samp(z, ref).pvalue)
    checks = (Check("KS p-value", pvalue, level, ">="),)
    return ValidationReport("shape", {"n": n, "replications": replications, "seed": seed}, checks,
                            {"pvalue": pvalue})


SCENARIOS: dict[str, Callable[..., ValidationReport]] = {
    "size-nominal": size_nominal,
    "appendix-j-rerand": appendix_j_rerand,
    "dispersive": dispersive,
    "type1-ordering": type1_ordering,
    "enumeration": enumeration,
    "shape": shape,
}


def run_scenario(name: str, **kwargs) -> ValidationReport:
    try:
        fn = SCENARIOS[name]
    except KeyError:
        raise ConfigurationError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None
    return fn(**{k: v for k, v in kwargs.items() if v is not None})
