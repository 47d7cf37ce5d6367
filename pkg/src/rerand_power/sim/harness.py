"""Monte Carlo and exhaustive-enumeration oracles for the analytic calculators.

Every replication redraws only the assignment; the population stays fixed.
Replication ``r`` draws from the stream ``SeedSequence(seed, spawn_key=(3, r))``
so results do not depend on how replications are spread over workers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ..errors import DomainError
from ..mixture import DEFAULT_DRAWS, DEFAULT_SEED, MixtureLaw, TruncationSpec, normal_quantile
from ..moments import Estimator
from .design import default_max_draws, rerandomize, treated_distances
from .inference import QuantileFn, estimate, quantile_table, run_test
from .population import (
    LinearGaussian,
    MultiplicativeHeterogeneity,
    PopulationMoments,
    PotentialOutcomesTable,
    linear_gaussian_population,
    multiplicative_population,
    population_moments,
)

Generator = Union[LinearGaussian, MultiplicativeHeterogeneity]

_POPULATION_STREAM = 2
_REPLICATION_STREAM = 3
_MAX_ENUMERATION = 500_000


@dataclass(frozen=True)
class SimConfig:
    n: int
    n1: int
    generator: Generator
    trunc: TruncationSpec
    alpha: float = 0.05
    estimator: Estimator = "neyman"
    replications: int = 1000
    seed: int = DEFAULT_SEED
    max_rerand_draws: int | None = None
    quantile_draws: int = DEFAULT_DRAWS

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise DomainError("replications must be positive")
        if not 1 <= self.n1 < self.n:
            raise DomainError(f"need 1 <= n1 < n, got n1 = {self.n1}, n = {self.n}")
        if not 0 < self.alpha <= 0.5:
            raise DomainError(f"significance level must lie in (0, 0.5], got {self.alpha!r}")
        if self.estimator not in ("neyman", "dfm"):
            raise DomainError(f"unknown variance estimator {self.estimator!r}")

    @property
    def k(self) -> int:
        return self.trunc.k

    @property
    def p1(self) -> float:
        return self.n1 / self.n

    @property
    def draw_budget(self) -> int:
        return self.max_rerand_draws or default_max_draws(self.trunc)


@dataclass(frozen=True)
class SimResult:
    rejection_rate: float
    mc_se: float
    replications: int
    mean_estimate: float
    mean_v_neyman: float
    mean_v_dfm: float
    acceptance_draws_mean: float
    coverage: float
    clip_events: int
    seed: int
    moments: PopulationMoments = field(repr=False)


def generate_population(config: SimConfig) -> PotentialOutcomesTable:
    """The fixed population of a configuration; deterministic given ``config.seed``."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_POPULATION_STREAM,)))
    gen = config.generator
    if isinstance(gen, LinearGaussian):
        return linear_gaussian_population(gen, config.n, config.n1, config.k, rng)
    if isinstance(gen, MultiplicativeHeterogeneity):
        return multiplicative_population(gen, config.n, config.k, rng)
    raise DomainError(f"unknown generator {gen!r}")


def _check_population(pop: PotentialOutcomesTable, config: SimConfig) -> None:
    if pop.n != config.n or pop.k != config.k:
        raise DomainError(
            f"population has n = {pop.n}, k = {pop.k}; configuration expects n = {config.n}, k = {config.k}"
        )


def _critical_values(config: SimConfig, quantiles: QuantileFn | None) -> QuantileFn:
    return quantiles or quantile_table(config.trunc, config.alpha, draws=config.quantile_draws, seed=config.seed)


def _replicate(pop: PotentialOutcomesTable, config: SimConfig, nu: QuantileFn, r: int) -> tuple:
    seq = np.random.SeedSequence(config.seed, spawn_key=(_REPLICATION_STREAM, r))
    assignment = rerandomize(pop, config.n1, config.trunc, seq, config.draw_budget)
    est = estimate(pop, assignment.z)
    decision = run_test(
        est.tau_hat,
        est.v_hat(config.estimator),
        est.r2_hat(config.estimator),
        config.n,
        config.trunc,
        config.alpha,
        nu,
    )
    lo, hi = decision.interval
    covered = lo <= pop.tau <= hi
    return (decision.reject, est.tau_hat, est.v_hat_neyman, est.v_hat_dfm, assignment.draws_used, covered, est.clip_events)


def empirical_power(
    config: SimConfig,
    population: PotentialOutcomesTable | None = None,
    workers: int = 1,
    quantiles: QuantileFn | None = None,
) -> SimResult:
    """Rejection rate of the one-sided test over repeated (re)randomizations."""
    pop = population if population is not None else generate_population(config)
    _check_population(pop, config)
    nu = _critical_values(config, quantiles)
    reps = range(config.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda r: _replicate(pop, config, nu, r), reps))
    else:
        rows = [_replicate(pop, config, nu, r) for r in reps]
    reject, tau_hat, v_n, v_d, draws, covered, clips = (np.array(col) for col in zip(*rows))
    rate = float(reject.mean())
    return SimResult(
        rejection_rate=rate,
        mc_se=math.sqrt(rate * (1.0 - rate) / config.replications),
        replications=config.replications,
        mean_estimate=float(tau_hat.mean()),
        mean_v_neyman=float(v_n.mean()),
        mean_v_dfm=float(v_d.mean()),
        acceptance_draws_mean=float(draws.mean()),
        coverage=float(covered.mean()),
        clip_events=int(clips.sum()),
        seed=config.seed,
        moments=population_moments(pop, config.p1),
    )


def standardized_estimates(
    config: SimConfig,
    population: PotentialOutcomesTable | None = None,
) -> np.ndarray:
    """``sqrt(N / V) (tau_hat - tau)`` over the configured replications."""
    pop = population if population is not None else generate_population(config)
    _check_population(pop, config)
    v = population_moments(pop, config.p1).v
    out = np.empty(config.replications)
    for r in range(config.replications):
        seq = np.random.SeedSequence(config.seed, spawn_key=(_REPLICATION_STREAM, r))
        z = rerandomize(pop, config.n1, config.trunc, seq, config.draw_budget).z
        out[r] = pop.y1[z].mean() - pop.y0[~z].mean()
    return math.sqrt(config.n / v) * (out - pop.tau)


@dataclass(frozen=True)
class EnumerationResult:
    """Exact design-based quantities over all accepted assignments."""

    n_assignments: int
    n_accepted: int
    power: float
    mean_tau_hat: float
    var_tau_hat: float
    mean_v_neyman: float
    mean_v_dfm: float
    tau: float


def enumerate_design(
    pop: PotentialOutcomesTable,
    config: SimConfig,
    quantiles: QuantileFn | None = None,
) -> EnumerationResult:
    """Average over every assignment with ``M <= a`` (each equally likely under rerandomization)."""
    _check_population(pop, config)
    total = math.comb(pop.n, config.n1)
    if total > _MAX_ENUMERATION:
        raise DomainError(f"{total} assignments is too many to enumerate")
    treated = np.array(list(itertools.combinations(range(pop.n), config.n1)), dtype=np.intp)
    accepted = treated[treated_distances(pop, treated) <= config.trunc.a]
    if accepted.shape[0] == 0:
        raise DomainError("no assignment satisfies the balance criterion")
    nu = _critical_values(config, quantiles)
    rows = []
    for idx in accepted:
        z = np.zeros(pop.n, dtype=bool)
        z[idx] = True
        est = estimate(pop, z)
        decision = run_test(
            est.tau_hat, est.v_hat(config.estimator), est.r2_hat(config.estimator),
            config.n, config.trunc, config.alpha, nu,
        )
        rows.append((decision.reject, est.tau_hat, est.v_hat_neyman, est.v_hat_dfm))
    reject, tau_hat, v_n, v_d = (np.array(col) for col in zip(*rows))
    return EnumerationResult(
        n_assignments=total,
        n_accepted=int(accepted.shape[0]),
        power=float(reject.mean()),
        mean_tau_hat=float(tau_hat.mean()),
        var_tau_hat=float(tau_hat.var()),
        mean_v_neyman=float(v_n.mean()),
        mean_v_dfm=float(v_d.mean()),
        tau=pop.tau,
    )


# ----------------------------------------------------------------------------
# dispersion of the mixture law against the standard Normal
# ----------------------------------------------------------------------------

PERCENT_LEVELS = tuple(round(j / 100, 2) for j in range(1, 100))


@dataclass(frozen=True)
class DispersionTable:
    """Quantile gaps ``nu_q - nu_p`` of the mixture against ``z_q - z_p``."""

    p: np.ndarray
    q: np.ndarray
    gap_mixture: np.ndarray
    gap_normal: np.ndarray
    se: np.ndarray

    @property
    def difference(self) -> np.ndarray:
        return self.gap_mixture - self.gap_normal

    def violations(self, bands: float = 3.0) -> int:
        """Pairs whose gap exceeds the Normal gap by more than ``bands`` standard errors."""
        return int(np.count_nonzero(self.difference > bands * self.se))


def dispersion_probe(
    law: MixtureLaw,
    levels: Sequence[float] = PERCENT_LEVELS,
    pairs: Sequence[tuple[float, float]] | None = None,
    batches: int = 20,
) -> DispersionTable:
    """Quantile-gap table with standard errors from ``batches`` equal sub-samples.

    Without ``pairs``, every ``p < q`` drawn from ``levels`` is compared.
    """
    if pairs is None:
        levels = sorted(set(float(v) for v in levels))
        pairs = [(p, q) for p, q in itertools.combinations(levels, 2)]
    pairs = [(float(p), float(q)) for p, q in pairs]
    if any(not 0 < p < q < 1 for p, q in pairs):
        raise DomainError("each pair must satisfy 0 < p < q < 1")
    grid = sorted({v for pair in pairs for v in pair})
    where = {v: i for i, v in enumerate(grid)}
    ip = np.array([where[p] for p, _ in pairs])
    iq = np.array([where[q] for _, q in pairs])
    z = np.array([normal_quantile(v) for v in grid])
    full = law.quantiles(grid)
    if law.closed_form:
        se = np.zeros(len(pairs))
    else:
        x = law.draws()
        size = x.size // batches
        if size < 100:
            raise DomainError("too few draws per batch")
        parts = np.sort(x[: size * batches].reshape(batches, size), axis=1)
        ranks = [min(max(math.ceil(size * v - 1e-9), 1), size) - 1 for v in grid]
        sub = parts[:, ranks]
        gaps = sub[:, iq] - sub[:, ip]
        se = gaps.std(axis=0, ddof=1) / math.sqrt(batches)
    return DispersionTable(
        p=np.array([p for p, _ in pairs]),
        q=np.array([q for _, q in pairs]),
        gap_mixture=full[iq] - full[ip],
        gap_normal=z[iq] - z[ip],
        se=se,
    )
