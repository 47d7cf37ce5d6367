import itertools
import math

import numpy as np
import pytest

from rerand_power.errors import AcceptanceFailure, DomainError
from rerand_power.mixture import TruncationSpec
from rerand_power.sim import (
    LinearGaussian,
    PotentialOutcomesTable,
    default_max_draws,
    linear_gaussian_population,
    mahalanobis,
    rerandomize,
    treated_distances,
)


@pytest.fixture(scope="module")
def six():
    rng = np.random.default_rng(12)
    return PotentialOutcomesTable(rng.standard_normal(6), rng.standard_normal(6), rng.standard_normal(6))


@pytest.fixture(scope="module")
def big():
    return linear_gaussian_population(LinearGaussian(1, 1, r2=0.3), 200, 100, 2, np.random.default_rng(13))


def test_balanced_means_give_zero(six):
    x = np.array([1.0, 2.0, 3.0, 3.0, 2.0, 1.0])
    pop = PotentialOutcomesTable(np.zeros(6), np.zeros(6), x)
    assert mahalanobis(pop, [1, 1, 1, 0, 0, 0]) == pytest.approx(0.0, abs=1e-15)


def test_scalar_formula(six):
    z = np.array([1, 0, 1, 1, 0, 0], dtype=bool)
    x = six.x[:, 0]
    diff = x[z].mean() - x[~z].mean()
    expected = 3 * 3 / 6 * diff**2 / np.var(x, ddof=1)
    assert mahalanobis(six, z) == pytest.approx(expected, rel=1e-12)


def test_batch_distances_match_direct_over_all_assignments(six):
    treated = np.array(list(itertools.combinations(range(6), 3)))
    batch = treated_distances(six, treated)
    direct = []
    for idx in treated:
        z = np.zeros(6, dtype=bool)
        z[idx] = True
        direct.append(mahalanobis(six, z))
    assert np.allclose(batch, direct, rtol=1e-12, atol=1e-14)
    # relabelling treated and control leaves M unchanged
    assert np.allclose(np.sort(batch), np.sort(batch[::-1]))
    assert np.allclose(batch, batch[::-1])


def test_mahalanobis_validation(six):
    with pytest.raises(DomainError):
        mahalanobis(six, [1, 1, 1, 1, 1, 1])
    with pytest.raises(DomainError):
        mahalanobis(six, [1, 0, 2, 0, 1, 0])
    with pytest.raises(DomainError):
        mahalanobis(six, [1, 0, 1])


def test_unconstrained_accepts_first_draw(big):
    a = rerandomize(big, 100, TruncationSpec.unconstrained(2), seed=1)
    assert a.draws_used == 1
    assert a.z.sum() == 100


def test_postcondition_replay(big):
    trunc = TruncationSpec.from_acceptance(2, 0.05)
    for seed in range(20):
        a = rerandomize(big, 100, trunc, seed=seed)
        assert a.z.sum() == 100
        assert mahalanobis(big, a.z) <= trunc.a
        assert mahalanobis(big, a.z) == pytest.approx(a.distance, rel=1e-10)


def test_geometric_draw_count(big):
    trunc = TruncationSpec.from_acceptance(2, 0.1)
    ss = np.random.SeedSequence(99)
    draws = [rerandomize(big, 100, trunc, child).draws_used for child in ss.spawn(10_000)]
    assert np.mean(draws) == pytest.approx(10.0, abs=0.5)


def test_deterministic_given_seed(big):
    trunc = TruncationSpec.from_acceptance(2, 0.01)
    a = rerandomize(big, 100, trunc, seed=5)
    b = rerandomize(big, 100, trunc, seed=5)
    assert np.array_equal(a.z, b.z) and a.draws_used == b.draws_used


def test_acceptance_failure_diagnostics(big):
    trunc = TruncationSpec.from_acceptance(2, 1e-6)
    with pytest.raises(AcceptanceFailure) as info:
        rerandomize(big, 100, trunc, seed=3, max_draws=500)
    err = info.value
    assert err.draws == 500
    assert err.threshold == trunc.a
    assert err.min_distance > trunc.a


def test_invalid_requests(big):
    with pytest.raises(DomainError):
        rerandomize(big, 100, TruncationSpec(2, a=0.0), seed=1)
    with pytest.raises(DomainError):
        rerandomize(big, 100, TruncationSpec.from_acceptance(3, 0.1), seed=1)
    with pytest.raises(DomainError):
        rerandomize(big, 0, TruncationSpec.from_acceptance(2, 0.1), seed=1)


def test_default_budget():
    assert default_max_draws(TruncationSpec.from_acceptance(2, 0.01)) == 5000
    assert default_max_draws(TruncationSpec.unconstrained(2)) == 1
    assert default_max_draws(TruncationSpec.from_acceptance(2, 0.3)) == math.ceil(50 / 0.3)
