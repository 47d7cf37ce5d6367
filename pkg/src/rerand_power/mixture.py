"""Limiting law of the mean difference under Mahalanobis rerandomization.

The standardized estimator converges to ``sqrt(1 - rho2) * eps0 + rho * L``,
where ``eps0`` is standard Normal and ``L = chi_{K,a} * S * sqrt(beta_K)`` is a
constrained Gaussian: the first coordinate of a K-dimensional standard Normal
vector conditioned on its squared norm not exceeding ``a``.

Two evaluation routes are provided and serve as oracles for each other:

* ``monte_carlo`` sorts seeded draws of the mixture (nearest-rank quantiles);
* ``integration`` integrates the Normal CDF against the exact density of
  ``L`` with adaptive Gauss-Kronrod quadrature and inverts by root finding.

The degenerate thresholds ``a = 0`` (``L = 0``) and ``a = inf`` (``L`` standard
Normal), and ``rho2 = 0``, are answered in closed form by either route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError

Method = Literal["monte_carlo", "integration"]

DEFAULT_DRAWS = 1_000_000
DEFAULT_SEED = 20_231_107

# Draws are generated in fixed-size chunks, each from its own derived stream,
# so the first n draws never depend on how many were requested in total.
_CHUNK = 1 << 18
_EPS_STREAM = 0
_L_STREAM = 1

_QUAD_EPSREL = 1e-10
_QUAD_EPSABS = 1e-14
_ROOT_XTOL = 1e-10
_BRACKET = 10.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


# ----------------------------------------------------------------------------
# Normal and chi-squared helpers
# ----------------------------------------------------------------------------


def _check_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"{name} must lie strictly between 0 and 1, got {p!r}")
    return p


def normal_quantile(p: float) -> float:
    """Standard Normal quantile ``z_p``."""
    return float(special.ndtri(_check_probability(p)))


def normal_survival(x: float) -> float:
    """Standard Normal survival function ``1 - Phi(x)``, accurate in both tails."""
    return float(special.ndtr(-float(x)))


def chi2_cdf(k: int, x: float) -> float:
    """Chi-squared(k) CDF; ``k = 0`` is the point mass at zero."""
    if k == 0:
        return 1.0 if x >= 0 else 0.0
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return float(special.chdtr(k, x))


def threshold_from_acceptance(k: int, p_a: float) -> float:
    """Mahalanobis threshold ``a`` with chi-squared(k) acceptance probability ``p_a``.

    >>> round(threshold_from_acceptance(2, 0.5), 6)
    1.386294
    """
    if k < 1 or int(k) != k:
        raise DomainError(f"covariate dimension must be a positive integer, got {k!r}")
    p_a = float(p_a)
    if not 0.0 < p_a <= 1.0:
        raise DomainError(f"acceptance probability must lie in (0, 1], got {p_a!r}")
    if p_a == 1.0:
        return math.inf
    return float(2.0 * special.gammaincinv(k / 2.0, p_a))


@dataclass(frozen=True)
class TruncationSpec:
    """Rerandomization criterion ``M <= a`` on ``k`` covariates.

    Give either the threshold ``a`` or the acceptance probability ``p_a``;
    the other is derived through the chi-squared(k) CDF.
    """

    k: int
    a: float | None = None
    p_a: float | None = None

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"covariate dimension must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        if (self.a is None) == (self.p_a is None):
            raise DomainError("give exactly one of the threshold a or the acceptance probability p_a")
        if self.p_a is not None:
            a = threshold_from_acceptance(self.k, self.p_a)
            object.__setattr__(self, "p_a", float(self.p_a))
            object.__setattr__(self, "a", a)
        else:
            a = float(self.a)
            if math.isnan(a) or a < 0:
                raise DomainError(f"threshold a must be nonnegative, got {self.a!r}")
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "p_a", chi2_cdf(self.k, a))

    @classmethod
    def from_acceptance(cls, k: int, p_a: float) -> TruncationSpec:
        return cls(k, p_a=p_a)

    @classmethod
    def from_threshold(cls, k: int, a: float) -> TruncationSpec:
        return cls(k, a=a)

    @classmethod
    def unconstrained(cls, k: int = 1) -> TruncationSpec:
        """Complete randomization: every assignment is accepted."""
        return cls(k, a=math.inf)

    @property
    def is_unconstrained(self) -> bool:
        return math.isinf(self.a)

    @property
    def is_degenerate(self) -> bool:
        return self.a == 0.0


# ----------------------------------------------------------------------------
# The constrained Gaussian L_{K,a}
# ----------------------------------------------------------------------------


def _stream(seed: int, stream: int, chunk: int, part: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, chunk, part)))


def _chunks(n: int):
    for i, start in enumerate(range(0, n, _CHUNK)):
        yield i, min(_CHUNK, n - start)


def _l_chunk(trunc: TruncationSpec, m: int, seed: int, chunk: int) -> np.ndarray:
    # one stream per component, so a shorter request is a prefix of a longer one
    k, a = trunc.k, trunc.a
    if math.isinf(a):
        return _stream(seed, _L_STREAM, chunk).standard_normal(m)
    if k == 1:
        # truncated standard Normal on (-sqrt(a), sqrt(a)) by inversion
        root = math.sqrt(a)
        lo = special.ndtr(-root)
        u = lo + _stream(seed, _L_STREAM, chunk).random(m) * (1.0 - 2.0 * lo)
        return np.clip(special.ndtri(u), -root, root)
    # inverse-CDF draw of chi2_K | chi2_K <= a; cost does not depend on p_a
    u = _stream(seed, _L_STREAM, chunk, 0).random(m) * trunc.p_a
    radius_sq = 2.0 * special.gammaincinv(k / 2.0, u)
    sign = 2.0 * _stream(seed, _L_STREAM, chunk, 1).integers(0, 2, size=m) - 1.0
    beta = _stream(seed, _L_STREAM, chunk, 2).beta(0.5, (k - 1) / 2.0, size=m)
    return sign * np.sqrt(radius_sq * beta)


def sample_L(trunc: TruncationSpec, n: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Draw ``n`` values of ``L_{K,a}``; deterministic given ``seed``.

    ``a = 0`` yields zeros (the law is a point mass).
    """
    if n < 1:
        raise DomainError(f"number of draws must be positive, got {n!r}")
    if trunc.is_degenerate:
        return np.zeros(n)
    out = np.empty(n)
    pos = 0
    for i, m in _chunks(n):
        out[pos : pos + m] = _l_chunk(trunc, m, seed, i)
        pos += m
    return out


def _sample_eps(n: int, seed: int) -> np.ndarray:
    out = np.empty(n)
    pos = 0
    for i, m in _chunks(n):
        out[pos : pos + m] = _stream(seed, _EPS_STREAM, i).standard_normal(m)
        pos += m
    return out


@lru_cache(maxsize=8)
def _components(k: int, a: float, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    # Shared across every rho2 for the same (K, a, draws, seed): one draw of the
    # Normal and constrained parts serves a whole sweep over rho2.
    eps = _sample_eps(n, seed)
    lvals = sample_L(TruncationSpec(k, a=a), n, seed)
    eps.setflags(write=False)
    lvals.setflags(write=False)
    return eps, lvals


def density_L(x: float, trunc: TruncationSpec) -> float:
    """Exact density of ``L_{K,a}``: ``phi(x) F_{K-1}(a - x^2) / F_K(a)``.

    Defined for finite positive thresholds only; zero on and outside
    ``|x| = sqrt(a)``.
    """
    a = trunc.a
    if a == 0.0 or math.isinf(a):
        raise DomainError("density of L is only defined for 0 < a < inf")
    x = float(x)
    rest = a - x * x
    if rest <= 0.0:
        return 0.0
    phi = math.exp(-0.5 * x * x) / _SQRT_2PI
    return phi * chi2_cdf(trunc.k - 1, rest) / trunc.p_a


# ----------------------------------------------------------------------------
# The mixture law
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class MixtureLaw:
    """``sqrt(1 - rho2) * eps0 + sqrt(rho2) * L_{K,a}`` plus its Monte Carlo settings."""

    rho2: float
    trunc: TruncationSpec
    mc_draws: int = DEFAULT_DRAWS
    seed: int = DEFAULT_SEED
    _key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        rho2 = float(self.rho2)
        if not 0.0 <= rho2 <= 1.0:
            raise DomainError(f"rho2 must lie in [0, 1], got {self.rho2!r}")
        if self.mc_draws < 1:
            raise DomainError("mc_draws must be positive")
        object.__setattr__(self, "rho2", rho2)
        object.__setattr__(self, "_key", (rho2, self.trunc.k, self.trunc.a, int(self.mc_draws), int(self.seed)))

    @property
    def rho(self) -> float:
        return math.sqrt(self.rho2)

    @property
    def sigma(self) -> float:
        return math.sqrt(1.0 - self.rho2)

    @property
    def is_standard_normal(self) -> bool:
        return self.rho2 == 0.0 or self.trunc.is_unconstrained

    @property
    def is_scaled_normal(self) -> bool:
        """``a = 0``: the law is N(0, 1 - rho2), a point mass when rho2 = 1."""
        return self.trunc.is_degenerate and not self.is_standard_normal

    @property
    def closed_form(self) -> bool:
        return self.is_standard_normal or self.is_scaled_normal

    def draws(self) -> np.ndarray:
        """The Monte Carlo sample of the mixture (read-only)."""
        return _mixture_draws(*self._key)

    def quantile(self, p: float, method: Method = "monte_carlo") -> float:
        return mixture_quantile(self, p, method)

    def quantiles(self, ps: Sequence[float], method: Method = "monte_carlo") -> np.ndarray:
        return mixture_quantiles(self, ps, method)

    def survival(self, x: float, method: Method = "monte_carlo") -> float:
        return mixture_survival(self, x, method)

    def cdf(self, x: float, method: Method = "monte_carlo") -> float:
        return mixture_cdf(self, x, method)


@lru_cache(maxsize=4)
def _mixture_draws(rho2: float, k: int, a: float, n: int, seed: int) -> np.ndarray:
    eps, lvals = _components(k, a, n, seed)
    out = math.sqrt(1.0 - rho2) * eps + math.sqrt(rho2) * lvals
    out.setflags(write=False)
    return out


def _nearest_rank(n: int, p: float) -> int:
    # smallest order statistic whose empirical CDF reaches p
    return min(max(math.ceil(n * p - 1e-9), 1), n) - 1


def _check_method(method: str) -> None:
    if method not in ("monte_carlo", "integration"):
        raise DomainError(f"unknown method {method!r}; use 'monte_carlo' or 'integration'")


def mixture_quantile(law: MixtureLaw, p: float, method: Method = "monte_carlo") -> float:
    """The p-quantile ``nu_p(rho2)`` of the mixture law."""
    p = _check_probability(p)
    _check_method(method)
    if law.is_standard_normal:
        return normal_quantile(p)
    if law.is_scaled_normal:
        return law.sigma * normal_quantile(p) if law.sigma > 0 else 0.0
    if method == "monte_carlo":
        x = law.draws()
        j = _nearest_rank(x.size, p)
        return float(np.partition(x, j)[j])
    return _quantile_integration(law, p)


def mixture_quantiles(law: MixtureLaw, ps: Sequence[float], method: Method = "monte_carlo") -> np.ndarray:
    """Vector of quantiles; the Monte Carlo route sorts once."""
    ps = [_check_probability(p) for p in ps]
    _check_method(method)
    if law.closed_form or method == "integration":
        return np.array([mixture_quantile(law, p, method) for p in ps])
    x = np.sort(law.draws())
    return x[[_nearest_rank(x.size, p) for p in ps]]


def quantile_standard_error(law: MixtureLaw, p: float) -> float:
    """Order-statistic standard error of the Monte Carlo p-quantile.

    Half the distance between the order statistics one binomial standard
    deviation either side of rank ``n p``; zero for closed-form laws.
    """
    p = _check_probability(p)
    if law.closed_form:
        return 0.0
    x = law.draws()
    n = x.size
    half = math.sqrt(n * p * (1.0 - p))
    lo = min(max(math.floor(n * p - half), 0), n - 1)
    hi = min(max(math.ceil(n * p + half), 0), n - 1)
    part = np.partition(x, [lo, hi])
    return float(part[hi] - part[lo]) / 2.0


def mixture_survival(law: MixtureLaw, x: float, method: Method = "monte_carlo") -> float:
    """``pr(mixture > x)``."""
    _check_method(method)
    x = float(x)
    if law.is_standard_normal:
        return normal_survival(x)
    if law.is_scaled_normal:
        if law.sigma == 0.0:
            return 1.0 if x < 0 else 0.0
        return normal_survival(x / law.sigma)
    if method == "monte_carlo":
        draws = law.draws()
        return float(np.count_nonzero(draws > x)) / draws.size
    return _cdf_integration(law, -x)


def mixture_cdf(law: MixtureLaw, x: float, method: Method = "monte_carlo") -> float:
    """``pr(mixture <= x)``."""
    _check_method(method)
    x = float(x)
    if law.closed_form:
        if law.is_scaled_normal and law.sigma == 0.0:
            return 1.0 if x >= 0 else 0.0
        return 1.0 - mixture_survival(law, x, method)
    if method == "monte_carlo":
        draws = law.draws()
        return float(np.count_nonzero(draws <= x)) / draws.size
    return _cdf_integration(law, x)


# ----------------------------------------------------------------------------
# Quadrature route
# ----------------------------------------------------------------------------
#
# Substituting l = sqrt(a) sin(theta) turns the density of L on (-sqrt(a),
# sqrt(a)) into a smooth integrand on (-pi/2, pi/2): F_{K-1}(a - l^2) becomes
# F_{K-1}(a cos^2 theta), which removes the endpoint singularity at K = 2.


def _l_weight(theta: float, k: int, a: float, root: float) -> float:
    c = math.cos(theta)
    lval = root * math.sin(theta)
    tail = 1.0 if k == 1 else float(special.chdtr(k - 1, a * c * c))
    return math.exp(-0.5 * lval * lval) / _SQRT_2PI * tail * root * c


def _quad(f, lo: float, hi: float) -> float:
    val, _ = integrate.quad(f, lo, hi, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=200)
    return val


def _l_cdf(k: int, a: float, p_a: float, x: float) -> float:
    root = math.sqrt(a)
    if x <= -root:
        return 0.0
    if x >= root:
        return 1.0
    top = math.asin(x / root)
    val = _quad(lambda t: _l_weight(t, k, a, root), -math.pi / 2, top)
    return min(max(val / p_a, 0.0), 1.0)


def _cdf_integration(law: MixtureLaw, x: float) -> float:
    k, a, p_a = law.trunc.k, law.trunc.a, law.trunc.p_a
    if law.sigma == 0.0:
        return _l_cdf(k, a, p_a, x)
    root = math.sqrt(a)
    rho, sigma = law.rho, law.sigma

    def integrand(theta: float) -> float:
        lval = root * math.sin(theta)
        both = special.ndtr((x - rho * lval) / sigma) + special.ndtr((x + rho * lval) / sigma)
        return _l_weight(theta, k, a, root) * both

    # folded onto theta >= 0 using the symmetry of L
    val = _quad(integrand, 0.0, math.pi / 2)
    return min(max(val / p_a, 0.0), 1.0)


def _quantile_integration(law: MixtureLaw, p: float) -> float:
    if p == 0.5:
        return 0.0
    if p < 0.5:
        # exact symmetry of the computed quantile function
        return -_quantile_integration(law, 1.0 - p)
    return float(optimize.brentq(lambda x: _cdf_integration(law, x) - p, 0.0, _BRACKET, xtol=_ROOT_XTOL))
