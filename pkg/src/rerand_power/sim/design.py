"""Complete randomization and Mahalanobis rerandomization of a fixed population."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import AcceptanceFailure, DomainError
from ..mixture import TruncationSpec
from .population import PotentialOutcomesTable

# cap on candidate assignments held in memory at once, in units of N
_BATCH_CELLS = 4_000_000


def _assignment_vector(z) -> np.ndarray:
    z = np.asarray(z)
    if z.dtype != bool:
        if not np.isin(z, (0, 1)).all():
            raise DomainError("assignment vector must hold only 0 and 1")
        z = z.astype(bool)
    return z


def mahalanobis(pop: PotentialOutcomesTable, z) -> float:
    """``M = (N1 N0 / N) (xbar1 - xbar0)' (S_X^2)^{-1} (xbar1 - xbar0)``."""
    z = _assignment_vector(z)
    if z.shape != (pop.n,):
        raise DomainError("assignment vector must have one entry per unit")
    n1 = int(z.sum())
    n0 = pop.n - n1
    if n1 == 0 or n0 == 0:
        raise DomainError("both groups must be nonempty")
    diff = pop.x[z].mean(axis=0) - pop.x[~z].mean(axis=0)
    quad = float(diff @ np.linalg.solve(pop.covariate_cov, diff))
    return n1 * n0 / pop.n * quad


def treated_distances(pop: PotentialOutcomesTable, treated: np.ndarray) -> np.ndarray:
    """Mahalanobis distances for a batch of assignments given as rows of treated indices."""
    n1 = treated.shape[1]
    sums = pop.whitened[treated].sum(axis=1)
    return pop.n / (n1 * (pop.n - n1)) * np.einsum("ij,ij->i", sums, sums)


def default_max_draws(trunc: TruncationSpec) -> int:
    """``ceil(50 / p_a)``: a calibrated criterion fails with probability below exp(-50)."""
    if trunc.is_unconstrained:
        return 1
    if trunc.p_a <= 0:
        raise DomainError("rerandomization needs a positive acceptance probability")
    return math.ceil(50.0 / trunc.p_a)


@dataclass(frozen=True)
class Assignment:
    z: np.ndarray
    draws_used: int
    distance: float


def rerandomize(
    pop: PotentialOutcomesTable,
    n1: int,
    trunc: TruncationSpec,
    seed,
    max_draws: int | None = None,
) -> Assignment:
    """First complete randomization of ``n1`` treated units with ``M <= a``.

    ``seed`` may be an integer, a ``SeedSequence`` or a ``Generator``.
    Candidates are drawn in batches but examined in order, so ``draws_used``
    counts complete randomizations up to and including the accepted one.
    """
    n = pop.n
    if not 1 <= n1 < n:
        raise DomainError(f"need 1 <= n1 < N, got n1 = {n1}, N = {n}")
    if trunc.k != pop.k:
        raise DomainError(f"criterion is on {trunc.k} covariates but the population has {pop.k}")
    if trunc.is_degenerate:
        raise DomainError("threshold a = 0 accepts no assignment in a finite population")
    rng = np.random.default_rng(seed)
    if max_draws is None:
        max_draws = default_max_draws(trunc)
    if trunc.is_unconstrained:
        batch = 1
    else:
        batch = max(1, min(math.ceil(2.0 / trunc.p_a), _BATCH_CELLS // n))
    used = 0
    best = math.inf
    while used < max_draws:
        b = min(batch, max_draws - used)
        treated = np.argpartition(rng.random((b, n)), n1 - 1, axis=1)[:, :n1]
        dist = treated_distances(pop, treated)
        hits = np.flatnonzero(dist <= trunc.a)
        if hits.size:
            j = int(hits[0])
            z = np.zeros(n, dtype=bool)
            z[treated[j]] = True
            return Assignment(z, used + j + 1, float(dist[j]))
        best = min(best, float(dist.min()))
        used += b
    raise AcceptanceFailure(
        f"no assignment with M <= {trunc.a:.6g} in {max_draws} draws "
        f"(smallest M seen {best:.6g}); the finite-N acceptance rate may be far below p_a = {trunc.p_a:.3g}",
        draws=max_draws,
        threshold=trunc.a,
        min_distance=best,
    )
