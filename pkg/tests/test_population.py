import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rerand_power.errors import ConfigurationError, DomainError
from rerand_power.mixture import TruncationSpec
from rerand_power.sim import (
    LinearGaussian,
    MultiplicativeHeterogeneity,
    PotentialOutcomesTable,
    SimConfig,
    generate_population,
    linear_gaussian_population,
    multiplicative_population,
    population_moments,
)


def _lstsq_projection_var(y, x):
    """Variance of the fitted values of y on [1, x]; divisor N - 1."""
    design = np.column_stack([np.ones(len(y)), x])
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ beta
    return float(np.var(fitted, ddof=1))


def test_projection_matches_regression_oracle():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((20, 3))
    y0 = x @ [0.5, -1.0, 0.2] + rng.standard_normal(20)
    y1 = y0 + 1.0 + x @ [0.3, 0.0, -0.4] + 0.5 * rng.standard_normal(20)
    pop = PotentialOutcomesTable(y1, y0, x)
    m = population_moments(pop, 0.4)
    assert m.s1_given_x_sq == pytest.approx(_lstsq_projection_var(y1, x), abs=1e-10)
    assert m.s0_given_x_sq == pytest.approx(_lstsq_projection_var(y0, x), abs=1e-10)
    assert m.s_tau_given_x_sq == pytest.approx(_lstsq_projection_var(y1 - y0, x), abs=1e-10)
    assert m.s1_sq == pytest.approx(np.var(y1, ddof=1))
    assert m.tau == pytest.approx(np.mean(y1 - y0))
    v = m.s1_sq / 0.4 + m.s0_sq / 0.6 - m.s_tau_sq
    assert m.v == pytest.approx(v)
    assert m.r2 == pytest.approx((m.s1_given_x_sq / 0.4 + m.s0_given_x_sq / 0.6 - m.s_tau_given_x_sq) / v)


def test_boundary_r2_values():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((30, 2))
    exact = PotentialOutcomesTable(x @ [1.0, 2.0] + 3.0, x @ [0.5, -1.0], x)
    m = population_moments(exact, 0.5)
    assert m.r2 == pytest.approx(1.0, abs=1e-12)
    assert m.s_tau_given_x_sq == pytest.approx(m.s_tau_sq, rel=1e-12)
    # outcomes orthogonal to X
    basis = np.column_stack([np.ones(30), x - x.mean(axis=0)])
    q, _ = np.linalg.qr(np.column_stack([basis, rng.standard_normal((30, 2))]))
    none = PotentialOutcomesTable(q[:, 3], q[:, 4], x)
    assert population_moments(none, 0.5).r2 == pytest.approx(0.0, abs=1e-12)


def test_singular_covariates_rejected():
    x = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    pop = PotentialOutcomesTable(np.zeros(10), np.zeros(10), x)
    with pytest.raises(DomainError):
        population_moments(pop, 0.5)


def test_shape_validation_and_immutability():
    with pytest.raises(DomainError):
        PotentialOutcomesTable(np.zeros(5), np.zeros(4), np.zeros((5, 1)))
    pop = PotentialOutcomesTable(np.zeros(5), np.ones(5), np.arange(5.0))
    assert pop.k == 1
    with pytest.raises(ValueError):
        pop.y1[0] = 3.0


def test_text_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    pop = PotentialOutcomesTable(rng.standard_normal(7), rng.standard_normal(7), rng.standard_normal((7, 2)))
    text = pop.to_text()
    assert text.splitlines()[0] == "7 2"
    assert text.splitlines()[1] == "y1 y0 x1 x2"
    back = PotentialOutcomesTable.from_text(text)
    assert np.array_equal(back.y1, pop.y1) and np.array_equal(back.x, pop.x)
    path = tmp_path / "pop.txt"
    pop.save(path)
    assert np.array_equal(PotentialOutcomesTable.load(path).y0, pop.y0)
    with pytest.raises(DomainError):
        PotentialOutcomesTable.from_text("3 1\ny1 y0 x1\n1 2 3\n")


def test_fixture_population_loads():
    from pathlib import Path

    pop = PotentialOutcomesTable.load(Path(__file__).parent / "data" / "population_8.txt")
    assert (pop.n, pop.k) == (8, 1)


def test_linear_gaussian_hits_targets_exactly():
    spec = LinearGaussian(s1=4.0, s0=3.0, s_tau=2.5, r2=0.4, s_tau_x=1.0, tau=1.5)
    pop = linear_gaussian_population(spec, 60, 30, 3, np.random.default_rng(4))
    m = population_moments(pop, 0.5)
    assert math.sqrt(m.s1_sq) == pytest.approx(4.0, rel=1e-10)
    assert math.sqrt(m.s0_sq) == pytest.approx(3.0, rel=1e-10)
    assert math.sqrt(m.s_tau_sq) == pytest.approx(2.5, rel=1e-10)
    assert math.sqrt(m.s_tau_given_x_sq) == pytest.approx(1.0, rel=1e-9)
    assert m.r2 == pytest.approx(0.4, abs=1e-10)
    assert m.tau == pytest.approx(1.5, abs=1e-12)


def test_linear_gaussian_large_population():
    cfg = SimConfig(n=10_000, n1=5000, generator=LinearGaussian(s1=2, s0=2, s_tau=1, r2=0.3),
                    trunc=TruncationSpec.from_acceptance(4, 0.1), seed=8)
    assert population_moments(generate_population(cfg), 0.5).r2 == pytest.approx(0.30, abs=0.02)


@settings(max_examples=30, deadline=None)
@given(
    s1=st.floats(0.5, 5), s0=st.floats(0.5, 5), het=st.floats(0, 0.95), r2=st.floats(0, 0.9),
    p1=st.sampled_from([0.3, 0.5, 0.7]),
)
def test_linear_gaussian_property(s1, s0, het, r2, p1):
    s_tau = het * (s1 + s0) * 0.9
    spec = LinearGaussian(s1=s1, s0=s0, s_tau=min(s_tau, s1 + s0), r2=r2)
    n = 40
    try:
        pop = linear_gaussian_population(spec, n, int(p1 * n), 2, np.random.default_rng(0))
    except ConfigurationError:
        return
    m = population_moments(pop, int(p1 * n) / n)
    assert m.r2 == pytest.approx(r2, abs=1e-8)
    assert m.s_tau_sq == pytest.approx(spec.s_tau**2, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize(
    "spec",
    [
        LinearGaussian(s1=1.0, s0=1.0, s_tau=3.0),  # S_tau > S1 + S0
        LinearGaussian(s1=2.0, s0=1.0, s_tau=1.0, r2=0.5),  # needs more than S0 allows
        LinearGaussian(s1=1.0, s0=1.0, s_tau=0.5, s_tau_x=0.8),
        LinearGaussian(s1=1.0, s0=1.0, r2=1.5),
    ],
)
def test_unsatisfiable_targets(spec):
    with pytest.raises(ConfigurationError):
        linear_gaussian_population(spec, 50, 25, 2, np.random.default_rng(0))


def test_population_too_small():
    with pytest.raises(ConfigurationError):
        linear_gaussian_population(LinearGaussian(1, 1), 5, 2, 2, np.random.default_rng(0))


def test_multiplicative_relations():
    additive = multiplicative_population(MultiplicativeHeterogeneity(0.0, s0=4.0, tau=2.0), 200, 2,
                                         np.random.default_rng(5))
    assert np.allclose(additive.effects, 2.0)
    pop = multiplicative_population(MultiplicativeHeterogeneity(0.5, s0=4.0), 2000, 2, np.random.default_rng(6))
    m = population_moments(pop, 0.5)
    assert math.sqrt(m.s_tau_sq) == pytest.approx(2.0, rel=0.02)
    assert math.sqrt(m.s1_sq) == pytest.approx(6.0, rel=0.02)


def test_generation_deterministic():
    cfg = SimConfig(n=50, n1=25, generator=LinearGaussian(1, 1, r2=0.2), trunc=TruncationSpec.from_acceptance(2, 0.1),
                    seed=11)
    a, b = generate_population(cfg), generate_population(cfg)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y1, b.y1)
