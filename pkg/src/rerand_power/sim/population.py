"""Fixed finite populations of potential outcomes and covariates."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import linalg

from ..errors import ConfigurationError, DomainError
from ..moments import OutcomeMoments


@dataclass(frozen=True, eq=False)
class PotentialOutcomesTable:
    """Potential outcomes ``y1``, ``y0`` and an ``N x K`` covariate matrix ``x``."""

    y1: np.ndarray
    y0: np.ndarray
    x: np.ndarray

    def __post_init__(self) -> None:
        y1 = np.asarray(self.y1, dtype=float)
        y0 = np.asarray(self.y0, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y1.ndim != 1 or y0.shape != y1.shape or x.shape[0] != y1.shape[0]:
            raise DomainError("y1, y0 and the rows of x must all have length N")
        for arr in (y1, y0, x):
            arr.setflags(write=False)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y1.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]

    @property
    def effects(self) -> np.ndarray:
        return self.y1 - self.y0

    @property
    def tau(self) -> float:
        return float(self.effects.mean())

    @cached_property
    def x_centered(self) -> np.ndarray:
        return self.x - self.x.mean(axis=0)

    @cached_property
    def covariate_cov(self) -> np.ndarray:
        return self.x_centered.T @ self.x_centered / (self.n - 1)

    @cached_property
    def covariate_chol(self) -> np.ndarray:
        """Lower Cholesky factor of ``S_X^2``; raises if it is singular."""
        cov = self.covariate_cov
        eig = np.linalg.eigvalsh(cov)
        if not eig[0] > 1e-12 * max(eig[-1], 1e-300):
            raise DomainError("covariate covariance matrix is singular")
        return linalg.cholesky(cov, lower=True)

    @cached_property
    def whitened(self) -> np.ndarray:
        """Centered covariates rotated to identity sample covariance."""
        return linalg.solve_triangular(self.covariate_chol, self.x_centered.T, lower=True).T

    def projection_sq(self, cov_with_x: np.ndarray) -> float:
        """``s (S_X^2)^{-1} s^T`` for a covariance row vector ``s``."""
        w = linalg.solve_triangular(self.covariate_chol, np.asarray(cov_with_x, dtype=float), lower=True)
        return float(w @ w)

    def shifted(self, delta: float) -> PotentialOutcomesTable:
        """Same population with every treated outcome moved by ``delta``."""
        return PotentialOutcomesTable(self.y1 + delta, self.y0, self.x)

    # -- columnar text format -------------------------------------------------

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.n} {self.k}\n")
        buf.write(" ".join(["y1", "y0"] + [f"x{j + 1}" for j in range(self.k)]) + "\n")
        for i in range(self.n):
            row = [self.y1[i], self.y0[i], *self.x[i]]
            buf.write(" ".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> PotentialOutcomesTable:
        lines = [line for line in text.splitlines() if line.strip()]
        if len(lines) < 2:
            raise DomainError("population file needs a size line and a column header")
        try:
            n, k = (int(tok) for tok in lines[0].split())
        except ValueError as exc:
            raise DomainError("first line must hold the integers n and k") from exc
        header = lines[1].split()
        if header[:2] != ["y1", "y0"] or len(header) != k + 2:
            raise DomainError(f"unexpected column header {lines[1]!r}")
        rows = np.array([[float(tok) for tok in line.split()] for line in lines[2:]], dtype=float)
        if rows.shape != (n, k + 2):
            raise DomainError(f"expected {n} rows of {k + 2} values, got shape {rows.shape}")
        return cls(rows[:, 0], rows[:, 1], rows[:, 2:])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> PotentialOutcomesTable:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class PopulationMoments:
    s1_sq: float
    s0_sq: float
    s_tau_sq: float
    s1_given_x_sq: float
    s0_given_x_sq: float
    s_tau_given_x_sq: float
    r2: float
    tau: float
    v: float

    def outcome_moments(self) -> OutcomeMoments:
        """Analytic-mode inputs; tiny rounding excursions outside [0, 1] are clipped."""
        return OutcomeMoments(
            self.s1_sq,
            self.s0_sq,
            self.s_tau_sq,
            min(self.s_tau_given_x_sq, self.s_tau_sq),
            min(max(self.r2, 0.0), 1.0),
        )


def population_moments(pop: PotentialOutcomesTable, p1: float) -> PopulationMoments:
    """Exact finite-population moments (divisor N - 1) and ``R^2``."""
    if not 0.0 < p1 < 1.0:
        raise DomainError(f"treated proportion must lie in (0, 1), got {p1!r}")
    p0 = 1.0 - p1
    n = pop.n
    xc = pop.x_centered

    def var(v: np.ndarray) -> float:
        return float(np.var(v, ddof=1))

    def cov_x(v: np.ndarray) -> np.ndarray:
        return (v - v.mean()) @ xc / (n - 1)

    s1x = pop.projection_sq(cov_x(pop.y1))
    s0x = pop.projection_sq(cov_x(pop.y0))
    stx = pop.projection_sq(cov_x(pop.effects))
    s1, s0, st = var(pop.y1), var(pop.y0), var(pop.effects)
    v = s1 / p1 + s0 / p0 - st
    r2 = (s1x / p1 + s0x / p0 - stx) / v if v > 0 else math.nan
    return PopulationMoments(s1, s0, st, s1x, s0x, stx, r2, pop.tau, v)


# ----------------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearGaussian:
    """Outcomes linear in Gaussian covariates plus noise orthogonal to them.

    Standard deviations ``s1``, ``s0``, ``s_tau`` and the explained effect
    heterogeneity ``s_tau_x`` are hit exactly in the realized population, as is
    ``r2``.
    """

    s1: float
    s0: float
    s_tau: float = 0.0
    r2: float = 0.0
    s_tau_x: float = 0.0
    tau: float = 0.0


@dataclass(frozen=True)
class MultiplicativeHeterogeneity:
    """``Y(1) = Y(0) + tau + sigma_tau * Y(0)`` with mean-zero ``Y(0)``.

    ``Y(0)`` is linear-Gaussian with standard deviation ``s0`` and share
    ``r2_control`` of its variance explained by the covariates.
    """

    sigma_tau: float
    s0: float = 1.0
    r2_control: float = 0.0
    tau: float = 0.0


def _basis(pop_x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, k = pop_x.shape
    xc = pop_x - pop_x.mean(axis=0)
    cov = xc.T @ xc / (n - 1)
    try:
        chol = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise ConfigurationError("generated covariates are collinear; increase n") from exc
    white = linalg.solve_triangular(chol, xc.T, lower=True).T
    # unit-variance score along the equal-weight direction of the whitened covariates
    fitted = white.sum(axis=1) / math.sqrt(k)
    return fitted, xc


def _noise(rng: np.random.Generator, xc: np.ndarray, count: int) -> np.ndarray:
    """``count`` mean-zero columns, orthogonal to X and to each other, unit sample variance."""
    n = xc.shape[0]
    basis = np.column_stack([np.ones(n), xc])
    q, _ = np.linalg.qr(np.column_stack([basis, rng.standard_normal((n, count))]))
    return q[:, basis.shape[1] :] * math.sqrt(n - 1)


def _check_size(n: int, k: int) -> None:
    if n < k + 4:
        raise ConfigurationError(f"need at least k + 4 = {k + 4} units, got {n}")


def linear_gaussian_population(
    spec: LinearGaussian, n: int, n1: int, k: int, rng: np.random.Generator
) -> PotentialOutcomesTable:
    _check_size(n, k)
    p1 = n1 / n
    p0 = 1.0 - p1
    s1_sq, s0_sq, st_sq, d_sq = spec.s1**2, spec.s0**2, spec.s_tau**2, spec.s_tau_x**2
    if d_sq > st_sq:
        raise ConfigurationError("explained heterogeneity s_tau_x cannot exceed s_tau")
    if not 0.0 <= spec.r2 <= 1.0:
        raise ConfigurationError(f"r2 must lie in [0, 1], got {spec.r2!r}")
    v = s1_sq / p1 + s0_sq / p0 - st_sq
    if spec.r2 > 0 and v <= 0:
        raise ConfigurationError("r2 is undefined when the true variance is not positive")
    d = math.sqrt(d_sq)
    # slopes c0, c1 = c0 + d along the fitted direction: c1^2/p1 + c0^2/p0 - d^2 = r2 * V
    qa = 1.0 / p1 + 1.0 / p0
    qb = 2.0 * d / p1
    qc = d_sq / p1 - d_sq - spec.r2 * max(v, 0.0)
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0:
        raise ConfigurationError("no slopes reproduce the requested r2")
    c0 = (-qb + math.sqrt(disc)) / (2.0 * qa)
    c1 = c0 + d
    if c0 * c0 > s0_sq * (1 + 1e-12) or c1 * c1 > s1_sq * (1 + 1e-12):
        raise ConfigurationError(
            f"r2 = {spec.r2} needs more explained variance than s1, s0 allow"
        )
    sig1 = math.sqrt(max(s1_sq - c1 * c1, 0.0))
    sig0 = math.sqrt(max(s0_sq - c0 * c0, 0.0))
    rest = st_sq - d_sq  # heterogeneity carried by the noise
    if sig1 * sig0 > 0:
        corr = (sig1 * sig1 + sig0 * sig0 - rest) / (2.0 * sig1 * sig0)
    else:
        corr = 0.0
        if not math.isclose(rest, sig1 * sig1 + sig0 * sig0, rel_tol=1e-9, abs_tol=1e-12):
            raise ConfigurationError("s_tau is incompatible with noiseless outcomes")
    if abs(corr) > 1.0 + 1e-12:
        raise ConfigurationError(
            f"s_tau = {spec.s_tau} is unreachable given s1 = {spec.s1}, s0 = {spec.s0} and r2"
        )
    corr = min(max(corr, -1.0), 1.0)
    x = rng.standard_normal((n, k))
    fitted, xc = _basis(x)
    w = _noise(rng, xc, 2)
    e0 = sig0 * w[:, 0]
    e1 = sig1 * (corr * w[:, 0] + math.sqrt(1.0 - corr * corr) * w[:, 1])
    y0 = c0 * fitted + e0
    y1 = spec.tau + c1 * fitted + e1
    return PotentialOutcomesTable(y1, y0, x)


def multiplicative_population(
    spec: MultiplicativeHeterogeneity, n: int, k: int, rng: np.random.Generator
) -> PotentialOutcomesTable:
    _check_size(n, k)
    if spec.s0 < 0 or not 0.0 <= spec.r2_control <= 1.0:
        raise ConfigurationError("s0 must be nonnegative and r2_control must lie in [0, 1]")
    x = rng.standard_normal((n, k))
    fitted, xc = _basis(x)
    w = _noise(rng, xc, 1)[:, 0]
    y0 = spec.s0 * (math.sqrt(spec.r2_control) * fitted + math.sqrt(1.0 - spec.r2_control) * w)
    y1 = y0 + spec.tau + spec.sigma_tau * y0
    return PotentialOutcomesTable(y1, y0, x)
