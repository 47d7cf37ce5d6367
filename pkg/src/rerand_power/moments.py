"""Finite-population variance model for the mean-difference estimator.

All quantities are limits in the sense of a sequence of growing finite
populations; none of them depends on the sample size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .errors import DegenerateVarianceError, DomainError
from .mixture import TruncationSpec

Estimator = Literal["neyman", "dfm"]

# relative slack when comparing limits that are equal in exact arithmetic
_REL_TOL = 1e-12


@dataclass(frozen=True)
class OutcomeMoments:
    """Potential-outcome variances ``S1^2, S0^2``, effect heterogeneity ``S_tau^2``,
    its covariate-explained part ``S^2_{tau|X}`` and the squared multiple
    correlation ``R^2`` between covariates and potential outcomes.
    """

    s1_sq: float
    s0_sq: float
    s_tau_sq: float = 0.0
    s_tau_given_x_sq: float = 0.0
    r2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("s1_sq", "s0_sq", "s_tau_sq", "s_tau_given_x_sq", "r2"):
            value = float(getattr(self, name))
            if math.isnan(value) or value < 0:
                raise DomainError(f"{name} must be nonnegative, got {value!r}")
            object.__setattr__(self, name, value)
        if self.s_tau_given_x_sq > self.s_tau_sq * (1 + _REL_TOL):
            raise DomainError("explained heterogeneity S^2_{tau|X} cannot exceed S^2_tau")
        if self.r2 > 1.0:
            raise DomainError(f"r2 must lie in [0, 1], got {self.r2!r}")

    @classmethod
    def from_sd(
        cls,
        s1: float,
        s0: float,
        s_tau: float = 0.0,
        s_tau_x: float = 0.0,
        r2: float = 0.0,
    ) -> OutcomeMoments:
        """Build from standard deviations, the way calculators are usually parameterized."""
        for name, value in (("s1", s1), ("s0", s0), ("s_tau", s_tau), ("s_tau_x", s_tau_x)):
            if value < 0:
                raise DomainError(f"{name} must be nonnegative, got {value!r}")
        return cls(s1 * s1, s0 * s0, s_tau * s_tau, s_tau_x * s_tau_x, r2)


@dataclass(frozen=True)
class DesignSpec:
    """Treated proportion, rerandomization criterion, test level and variance estimator."""

    p1: float = 0.5
    trunc: TruncationSpec = TruncationSpec(1, a=math.inf)
    alpha: float = 0.05
    estimator: Estimator = "neyman"
    n: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.p1 < 1.0:
            raise DomainError(f"treated proportion p1 must lie in (0, 1), got {self.p1!r}")
        if not 0.0 < self.alpha <= 0.5:
            raise DomainError(f"significance level must lie in (0, 0.5], got {self.alpha!r}")
        if self.estimator not in ("neyman", "dfm"):
            raise DomainError(f"unknown variance estimator {self.estimator!r}")
        if self.n is not None and self.n < 2:
            raise DomainError(f"sample size must be at least 2, got {self.n!r}")

    @property
    def p0(self) -> float:
        return 1.0 - self.p1

    @classmethod
    def from_counts(cls, n1: int, n0: int, **kwargs) -> DesignSpec:
        if n1 < 1 or n0 < 1:
            raise DomainError("both groups need at least one unit")
        return cls(p1=n1 / (n1 + n0), n=n1 + n0, **kwargs)


@dataclass(frozen=True)
class VarianceSummary:
    """True variance ``v``, estimator limit ``v_tilde >= v``, ``r2`` and the
    deflated ``r2_tilde = v * r2 / v_tilde``."""

    v: float
    v_tilde: float
    r2: float
    r2_tilde: float

    @classmethod
    def from_limits(cls, v: float, v_tilde: float, r2: float) -> VarianceSummary:
        if not v > 0:
            raise DegenerateVarianceError(f"true variance must be positive, got {v!r}")
        if v_tilde < v * (1 - _REL_TOL):
            raise DomainError(f"variance limit {v_tilde!r} is below the true variance {v!r}")
        if not 0.0 <= r2 <= 1.0:
            raise DomainError(f"r2 must lie in [0, 1], got {r2!r}")
        v_tilde = max(v_tilde, v)
        return cls(v=v, v_tilde=v_tilde, r2=r2, r2_tilde=v * r2 / v_tilde)

    @property
    def conservative(self) -> bool:
        return self.v_tilde > self.v


def true_variance(m: OutcomeMoments, d: DesignSpec) -> float:
    """``V = S1^2/p1 + S0^2/p0 - S_tau^2``."""
    v = m.s1_sq / d.p1 + m.s0_sq / d.p0 - m.s_tau_sq
    if not v > 0:
        raise DegenerateVarianceError(
            f"true variance V = {v:g} is not positive; power is degenerate (0 or 1)"
        )
    return v


def variance_limit(m: OutcomeMoments, d: DesignSpec) -> float:
    """Probability limit of the Neyman or DFM variance estimator."""
    true_variance(m, d)
    neyman = m.s1_sq / d.p1 + m.s0_sq / d.p0
    if d.estimator == "neyman":
        return neyman
    if m.s_tau_given_x_sq > neyman:
        raise DomainError("S^2_{tau|X} exceeds the Neyman variance limit")
    return neyman - m.s_tau_given_x_sq


def summarize(m: OutcomeMoments, d: DesignSpec) -> VarianceSummary:
    return VarianceSummary.from_limits(true_variance(m, d), variance_limit(m, d), m.r2)
