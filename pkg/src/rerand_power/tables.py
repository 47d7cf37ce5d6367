"""Grid studies: sample-size ratios over (K, R^2, p_a, S_tau) and power curves."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import asdict, dataclass, fields
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import optimize

from .calculators import (
    DEFAULT_MC,
    MonteCarloSettings,
    crossing_threshold_from_summary,
    rand_power_from_summary,
    ratio_from_summary,
    rerand_power_from_summary,
)
from .errors import DomainError
from .mixture import TruncationSpec
from .moments import DesignSpec, OutcomeMoments, VarianceSummary, summarize

DEFAULT_KS = (1,) + tuple(range(10, 101, 10))
DEFAULT_R2S = tuple(round(0.1 * j, 1) for j in range(10))


@dataclass(frozen=True)
class RatioRow:
    k: int
    r2: float
    pa: float
    s_tau: float
    s1: float
    s0: float
    ratio: float
    mc_draws: int
    seed: int


def _rows_to_csv(rows: Sequence, header: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


@dataclass(frozen=True)
class RatioTable:
    rows: tuple[RatioRow, ...]

    def select(self, where: Callable[[RatioRow], bool] | None = None) -> list[RatioRow]:
        return [r for r in self.rows if where is None or where(r)]

    def median(self, where: Callable[[RatioRow], bool] | None = None) -> float:
        chosen = self.select(where)
        if not chosen:
            raise DomainError("no cells match the requested sub-grid")
        return float(statistics.median(r.ratio for r in chosen))

    def inflation(self, s_tau: float, baseline: float = 0.0) -> float:
        """Mean over matching cells of ``ratio(s_tau) / ratio(baseline) - 1``."""
        base = {(r.k, r.r2, r.pa, r.s1, r.s0): r.ratio for r in self.rows if r.s_tau == baseline}
        rel = [
            r.ratio / base[(r.k, r.r2, r.pa, r.s1, r.s0)] - 1.0
            for r in self.rows
            if r.s_tau == s_tau and (r.k, r.r2, r.pa, r.s1, r.s0) in base
        ]
        if not rel:
            raise DomainError(f"no cells pair S_tau = {s_tau} with the baseline S_tau = {baseline}")
        return float(np.mean(rel))

    def to_csv(self) -> str:
        return _rows_to_csv([tuple(asdict(r).values()) for r in self.rows], [f.name for f in fields(RatioRow)])


def sweep_ratio(
    ks: Iterable[int] = DEFAULT_KS,
    r2s: Iterable[float] = DEFAULT_R2S,
    pas: Iterable[float] = (0.001,),
    s_taus: Iterable[float] = (0.0,),
    s1: float = 4.0,
    s0: float = 4.0,
    p1: float = 0.5,
    gamma: float = 0.8,
    alpha: float = 0.05,
    estimator: str = "neyman",
    mc: MonteCarloSettings = DEFAULT_MC,
) -> RatioTable:
    """``N_rr / N_cr`` on a full factorial grid.

    ``R^2`` is taken relative to the true variance of each cell. Cells share one
    Monte Carlo sample per (K, p_a), so K is the outermost loop.
    """
    ks, r2s, pas, s_taus = list(ks), list(r2s), list(pas), list(s_taus)
    if not (ks and r2s and pas and s_taus):
        raise DomainError("every grid axis needs at least one value")
    rows = []
    for k in ks:
        for pa in pas:
            trunc = TruncationSpec.from_acceptance(k, pa)
            design = DesignSpec(p1=p1, trunc=trunc, alpha=alpha, estimator=estimator)
            for s_tau in s_taus:
                for r2 in r2s:
                    m = OutcomeMoments.from_sd(s1, s0, s_tau, 0.0, r2)
                    ratio = ratio_from_summary(summarize(m, design), trunc, alpha, gamma, mc)
                    rows.append(RatioRow(k, float(r2), float(pa), float(s_tau), s1, s0, ratio, mc.draws, mc.seed))
    return RatioTable(tuple(rows))


# ----------------------------------------------------------------------------
# power curves on the scaled effect tau * sqrt(N / V)
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveRow:
    v_tilde: float
    scaled_tau: float
    power_cr: float
    power_rr: float


@dataclass(frozen=True)
class PowerCurve:
    v: float
    v_tilde: float
    r2: float
    threshold: float
    crossing: float | None
    rows: tuple[CurveRow, ...]

    @property
    def power_cr(self) -> np.ndarray:
        return np.array([r.power_cr for r in self.rows])

    @property
    def power_rr(self) -> np.ndarray:
        return np.array([r.power_rr for r in self.rows])

    @property
    def scaled_tau(self) -> np.ndarray:
        return np.array([r.scaled_tau for r in self.rows])


def power_curve(
    v_tilde: float,
    v: float = 1.0,
    r2: float = 0.5,
    trunc: TruncationSpec = TruncationSpec(1, a=0.0),
    alpha: float = 0.05,
    grid: Sequence[float] = tuple(np.linspace(0.0, 5.0, 51)),
    mc: MonteCarloSettings = DEFAULT_MC,
) -> PowerCurve:
    """Asymptotic power of both designs along ``tau sqrt(N / V)``.

    ``threshold`` is the scaled effect beyond which rerandomization is at least
    as powerful; ``crossing`` is where the curves actually meet when the
    complete-randomization curve starts on top (``None`` otherwise).
    """
    s = VarianceSummary.from_limits(v, v_tilde, r2)
    root_v = math.sqrt(v)

    def gap(t: float) -> float:
        rr, _ = rerand_power_from_summary(s, trunc, alpha, t * root_v, mc)
        cr, _ = rand_power_from_summary(s, alpha, t * root_v)
        return rr - cr

    rows = []
    for t in grid:
        rr, _ = rerand_power_from_summary(s, trunc, alpha, t * root_v, mc)
        cr, _ = rand_power_from_summary(s, alpha, t * root_v)
        rows.append(CurveRow(v_tilde, float(t), cr, rr))
    threshold = crossing_threshold_from_summary(s, trunc, alpha, mc) / root_v
    crossing = None
    if gap(0.0) < 0:
        hi = max(threshold, 1e-12)
        if gap(hi) >= 0:
            crossing = float(optimize.brentq(gap, 0.0, hi, xtol=1e-10))
    return PowerCurve(v, v_tilde, r2, threshold, crossing, tuple(rows))


def curves_to_csv(curves: Sequence[PowerCurve]) -> str:
    rows = [tuple(asdict(r).values()) for c in curves for r in c.rows]
    return _rows_to_csv(rows, [f.name for f in fields(CurveRow)])
