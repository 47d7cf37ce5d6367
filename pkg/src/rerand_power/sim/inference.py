"""Mean-difference estimation, variance estimation and the one-sided test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from ..errors import DomainError
from ..mixture import DEFAULT_DRAWS, DEFAULT_SEED, Method, MixtureLaw, TruncationSpec
from ..moments import Estimator
from .design import _assignment_vector
from .population import PotentialOutcomesTable

QuantileFn = Callable[[float, float], float]


@dataclass(frozen=True)
class Estimates:
    tau_hat: float
    v_hat_neyman: float
    v_hat_dfm: float
    r2_hat_neyman: float
    r2_hat_dfm: float
    clip_events: int = 0

    def v_hat(self, estimator: Estimator) -> float:
        return self.v_hat_neyman if estimator == "neyman" else self.v_hat_dfm

    def r2_hat(self, estimator: Estimator) -> float:
        return self.r2_hat_neyman if estimator == "neyman" else self.r2_hat_dfm


def _clip_unit(value: float) -> tuple[float, int]:
    if math.isnan(value):
        return 0.0, 1
    if value < 0.0:
        return 0.0, 1
    if value > 1.0:
        return 1.0, 1
    return value, 0


def estimate(pop: PotentialOutcomesTable, z) -> Estimates:
    """Mean difference, Neyman and DFM variance estimates and plug-in ``R^2``.

    Within-group covariances use divisor ``n_z - 1``; projections use the
    full-population ``S_X^2``, which is known at the design stage. Plug-in
    ``R^2`` values outside [0, 1] and negative DFM estimates are clipped and
    counted in ``clip_events``.
    """
    z = _assignment_vector(z)
    n1 = int(z.sum())
    n0 = pop.n - n1
    if min(n1, n0) < pop.k + 2:
        raise DomainError(f"each group needs at least k + 2 = {pop.k + 2} units")
    p1, p0 = n1 / pop.n, n0 / pop.n
    y1, y0 = pop.y1[z], pop.y0[~z]
    x1, x0 = pop.x[z], pop.x[~z]
    r1, r0 = y1 - y1.mean(), y0 - y0.mean()
    s1_sq = float(r1 @ r1) / (n1 - 1)
    s0_sq = float(r0 @ r0) / (n0 - 1)
    s1x = r1 @ (x1 - x1.mean(axis=0)) / (n1 - 1)
    s0x = r0 @ (x0 - x0.mean(axis=0)) / (n0 - 1)
    s1_given_x = pop.projection_sq(s1x)
    s0_given_x = pop.projection_sq(s0x)
    st_given_x = pop.projection_sq(s1x - s0x)
    explained = s1_given_x / p1 + s0_given_x / p0 - st_given_x

    v_n = s1_sq / p1 + s0_sq / p0
    v_dfm = v_n - st_given_x
    clips = 0
    if v_dfm < 0:
        v_dfm, clips = 0.0, 1
    r2_n, c = _clip_unit(explained / v_n if v_n > 0 else math.nan)
    clips += c
    r2_d, c = _clip_unit(explained / v_dfm if v_dfm > 0 else math.nan)
    clips += c
    tau_hat = float(y1.mean() - y0.mean())
    return Estimates(tau_hat, v_n, v_dfm, r2_n, r2_d, clips)


class QuantileTable:
    """Mixture quantiles ``nu_p(rho2)`` tabulated on a uniform ``rho2`` grid.

    Linear interpolation between grid points; grid points themselves
    (including ``rho2 = 0``, the Normal case) are exact values of the chosen
    method. All grid entries share one Monte Carlo sample, so the tabulated
    curve is smooth in ``rho2``.
    """

    def __init__(
        self,
        trunc: TruncationSpec,
        levels: tuple[float, ...],
        grid: int = 101,
        method: Method = "monte_carlo",
        draws: int = DEFAULT_DRAWS,
        seed: int = DEFAULT_SEED,
    ):
        self.trunc = trunc
        self.method = method
        self.draws = draws
        self.seed = seed
        self.rho2 = np.linspace(0.0, 1.0, grid)
        self.values = {
            float(p): np.array([MixtureLaw(r, trunc, draws, seed).quantile(p, method) for r in self.rho2])
            for p in levels
        }

    def __call__(self, p: float, rho2: float) -> float:
        table = self.values.get(float(p))
        if table is None:
            return MixtureLaw(rho2, self.trunc, self.draws, self.seed).quantile(p, self.method)
        return float(np.interp(rho2, self.rho2, table))


@lru_cache(maxsize=16)
def quantile_table(
    trunc: TruncationSpec,
    alpha: float,
    grid: int = 101,
    method: Method = "monte_carlo",
    draws: int = DEFAULT_DRAWS,
    seed: int = DEFAULT_SEED,
) -> QuantileTable:
    """Cached table of the one-sided and two-sided critical values for level ``alpha``."""
    return QuantileTable(trunc, (1.0 - alpha, 1.0 - alpha / 2.0), grid, method, draws, seed)


def direct_quantiles(trunc: TruncationSpec, draws: int = DEFAULT_DRAWS, seed: int = DEFAULT_SEED) -> QuantileFn:
    def nu(p: float, rho2: float) -> float:
        return MixtureLaw(rho2, trunc, draws, seed).quantile(p)

    return nu


@dataclass(frozen=True)
class Decision:
    reject: bool
    threshold: float
    interval: tuple[float, float]


def run_test(
    tau_hat: float,
    v_hat: float,
    r2_hat: float,
    n: int,
    trunc: TruncationSpec,
    alpha: float,
    quantiles: QuantileFn | None = None,
) -> Decision:
    """Reject ``H0: tau = 0`` when ``tau_hat > nu_{1-alpha}(r2_hat) sqrt(v_hat / n)``.

    Also returns the two-sided interval ``tau_hat +- nu_{1-alpha/2}(r2_hat) sqrt(v_hat / n)``.
    """
    if v_hat < 0:
        raise DomainError(f"variance estimate must be nonnegative, got {v_hat!r}")
    nu = quantiles or direct_quantiles(trunc)
    scale = math.sqrt(v_hat / n)
    threshold = nu(1.0 - alpha, r2_hat) * scale
    half = nu(1.0 - alpha / 2.0, r2_hat) * scale
    return Decision(bool(tau_hat > threshold), threshold, (tau_hat - half, tau_hat + half))
