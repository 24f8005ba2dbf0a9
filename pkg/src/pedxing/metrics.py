"""Surrogate safety metrics and the episode statistics pipeline.

Per-tick metrics (TTC, DST) are computed from trace states, time-averaged
per episode, outlier-filtered per group with the 1.5 IQR rule, and compared
across controllers with Kruskal-Wallis (3 groups) and Mann-Whitney U
(pairwise).  The statistical tests are implemented here directly: midranks
with tie correction, the exact small-sample U distribution, and the normal
approximation with tie and continuity corrections.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .scenario import JointState, ScenarioGeometry

__all__ = [
    "MetricsConfig",
    "ttc_metric",
    "dst_metric",
    "episode_averages",
    "IqrResult",
    "iqr_filter",
    "KruskalResult",
    "kruskal_wallis",
    "MannWhitneyResult",
    "mann_whitney",
    "CHI2_CRIT_3_GROUPS",
    "build_report",
    "format_table",
]

# Chi-square critical value at alpha = 0.01 for 3 groups (2 degrees of freedom).
CHI2_CRIT_3_GROUPS = 9.21


@dataclass(frozen=True)
class MetricsConfig:
    kappa: float = 0.05        # speed floor in TTC/DST denominators [m/s]
    t_safe: float = 1.0        # reaction-time headway in DST [s]
    clamp_gaps: bool = True    # clamp remaining gaps at zero once passed

    def __post_init__(self) -> None:
        if self.kappa <= 0:
            raise ValueError(f"MetricsConfig.kappa must be > 0, got {self.kappa}")
        if self.t_safe < 0:
            raise ValueError(f"MetricsConfig.t_safe must be >= 0, got {self.t_safe}")


def _gaps(state: JointState, geometry: ScenarioGeometry, clamp: bool) -> tuple[float, float]:
    gap_veh = geometry.conflict_x - state.x_veh
    gap_ped = geometry.conflict_y - state.y_ped
    if clamp:
        gap_veh = max(gap_veh, 0.0)
        gap_ped = max(gap_ped, 0.0)
    return gap_veh, gap_ped


def ttc_metric(state: JointState, geometry: ScenarioGeometry,
               cfg: MetricsConfig = MetricsConfig()) -> float:
    """Time for the vehicle to cover both remaining gaps to the conflict point.

    The vehicle speed is floored at kappa, so a standing vehicle near an
    unresolved conflict reads as a very large (safe) TTC rather than a
    division by zero.
    """
    gap_veh, gap_ped = _gaps(state, geometry, cfg.clamp_gaps)
    return (gap_veh + gap_ped) / max(state.v_veh, cfg.kappa)


def dst_metric(state: JointState, geometry: ScenarioGeometry,
               cfg: MetricsConfig = MetricsConfig()) -> float:
    """Deceleration-to-safety-time: braking effort needed to restore a t_safe headway."""
    gap_veh, gap_ped = _gaps(state, geometry, cfg.clamp_gaps)
    denom = max(gap_veh + gap_ped + state.v_veh * cfg.t_safe, cfg.kappa)
    return 0.5 * (state.v_ped ** 2 + state.v_veh ** 2) / denom


def episode_averages(states: Sequence[JointState], geometry: ScenarioGeometry,
                     cfg: MetricsConfig = MetricsConfig()) -> tuple[float, float]:
    """Trapezoidal time averages (TTC_avg, DST_avg) over the episode window."""
    if len(states) < 2:
        raise ValueError("episode_averages needs at least two states")
    times = np.array([s.t for s in states])
    span = times[-1] - times[0]
    if span <= 0:
        raise ValueError(f"episode window must have positive duration, got {span}")
    ttc = np.array([ttc_metric(s, geometry, cfg) for s in states])
    dst = np.array([dst_metric(s, geometry, cfg) for s in states])
    return float(np.trapezoid(ttc, times) / span), float(np.trapezoid(dst, times) / span)


# ---------------------------------------------------------------------------
# outlier filtering


@dataclass(frozen=True)
class IqrResult:
    kept: np.ndarray
    removed: np.ndarray
    undersized: bool    # sample too small to filter; returned unchanged


def iqr_filter(values: Iterable[float], factor: float = 1.5) -> IqrResult:
    """Keep values within [Q1 - factor*IQR, Q3 + factor*IQR] (closed band).

    Quartiles use linear interpolation.  Samples with fewer than 4 values are
    returned unchanged with the ``undersized`` flag set.
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size < 4:
        return IqrResult(kept=arr, removed=np.empty(0), undersized=True)
    q1, q3 = np.percentile(arr, [25.0, 75.0])
    iqr = q3 - q1
    lo, hi = q1 - factor * iqr, q3 + factor * iqr
    mask = (arr >= lo) & (arr <= hi)
    return IqrResult(kept=arr[mask], removed=arr[~mask], undersized=False)


# ---------------------------------------------------------------------------
# rank statistics


def _midranks(pooled: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing the average rank of their run."""
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(pooled.size, dtype=float)
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_term(pooled: np.ndarray) -> float:
    """Sum of t^3 - t over tie groups of size t."""
    return float(sum(t ** 3 - t for t in Counter(pooled.tolist()).values() if t > 1))


@dataclass(frozen=True)
class KruskalResult:
    h: float
    df: int
    p: float            # closed form for df = 2, NaN otherwise

    @property
    def significant(self) -> bool:
        """Decision at alpha = 0.01 for the 3-group comparison."""
        if self.df != 2:
            raise ValueError("significance threshold is defined for 3 groups (df = 2)")
        return self.h >= CHI2_CRIT_3_GROUPS


def kruskal_wallis(groups: Sequence[Iterable[float]]) -> KruskalResult:
    """Kruskal-Wallis H with midranks and tie correction.

    For three groups the p-value uses the exact chi-square(df=2) survival
    function exp(-H/2).  A pooled sample with every value identical has no
    rank information; H is defined as 0 there.
    """
    arrays = [np.asarray(list(g), dtype=float) for g in groups]
    if len(arrays) < 2:
        raise ValueError("kruskal_wallis needs at least two groups")
    for i, a in enumerate(arrays):
        if a.size == 0:
            raise ValueError(f"kruskal_wallis: group {i} is empty")
    pooled = np.concatenate(arrays)
    n = pooled.size
    ranks = _midranks(pooled)

    h = 0.0
    offset = 0
    for a in arrays:
        r = ranks[offset:offset + a.size].sum()
        h += r * r / a.size
        offset += a.size
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0)

    correction = 1.0 - _tie_term(pooled) / (n ** 3 - n)
    h = 0.0 if correction <= 0.0 else h / correction

    df = len(arrays) - 1
    p = math.exp(-h / 2.0) if df == 2 else math.nan
    return KruskalResult(h=float(h), df=df, p=p)


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float            # min(U_a, U_b)
    p: float            # two-sided
    method: str         # "exact" | "normal"


def _exact_u_cdf(n1: int, n2: int, u_cap: int) -> int:
    """Number of rank arrangements with U <= u_cap (exact integer count).

    DP over f(m, n, u) = f(m-1, n, u-n) + f(m, n-1, u): the largest remaining
    observation comes from the first sample (beating all n of the second) or
    from the second.
    """
    # layer[m][u] = count for (m, current n); build n upward
    layer = [[0] * (u_cap + 1) for _ in range(n1 + 1)]
    layer[0][0] = 1
    for m in range(1, n1 + 1):
        layer[m][0] = 1  # n = 0: only U = 0
    for n in range(1, n2 + 1):
        prev = layer
        layer = [row[:] for row in prev]   # m = 0 row: U = 0 only, already right
        for m in range(1, n1 + 1):
            row = layer[m]
            same_n = layer[m - 1]
            below = prev[m]
            for u in range(u_cap + 1):
                row[u] = below[u] + (same_n[u - n] if u >= n else 0)
    return sum(layer[n1])


def mann_whitney(a: Iterable[float], b: Iterable[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test.

    Exact when min(n1, n2) <= 8 and the pooled sample is tie-free, otherwise
    a normal approximation with tie and continuity corrections.  The reported
    statistic is min(U_a, U_b); swapping the samples changes neither U nor p.
    """
    x = np.asarray(list(a), dtype=float)
    y = np.asarray(list(b), dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("mann_whitney: both samples must be non-empty")
    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    r1 = ranks[:n1].sum()
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1
    u_min = min(u1, u2)

    has_ties = np.unique(pooled).size < pooled.size
    if min(n1, n2) <= 8 and not has_ties:
        count = _exact_u_cdf(n1, n2, int(round(u_min)))
        p = 2.0 * count / math.comb(n1 + n2, n1)
        return MannWhitneyResult(u=float(u_min), p=min(1.0, p), method="exact")

    n = n1 + n2
    var = n1 * n2 / 12.0 * ((n + 1.0) - _tie_term(pooled) / (n * (n - 1.0)))
    if var <= 0:
        return MannWhitneyResult(u=float(u_min), p=1.0, method="normal")
    z = (u_min - n1 * n2 / 2.0 + 0.5) / math.sqrt(var)
    p = min(1.0, math.erfc(-z / math.sqrt(2.0)))
    return MannWhitneyResult(u=float(u_min), p=p, method="normal")


# ---------------------------------------------------------------------------
# report assembly

EPISODE_METRICS = ("t_end", "ttc_avg", "dst_avg")


@dataclass(frozen=True)
class GroupStats:
    scenario: str
    controller: str
    metric: str
    n_total: int
    n_kept: int
    mean: float
    std: float          # sample standard deviation (ddof = 1), NaN for n_kept < 2
    undersized: bool


@dataclass(frozen=True)
class ComparisonStats:
    scenario: str
    metric: str
    h: float
    p_kw: float
    mw_pair: tuple[str, str]
    u_mw: float
    p_mw: float


@dataclass(frozen=True)
class StatsReport:
    groups: list[GroupStats] = field(default_factory=list)
    comparisons: list[ComparisonStats] = field(default_factory=list)

    def group(self, scenario: str, controller: str, metric: str) -> GroupStats:
        for g in self.groups:
            if (g.scenario, g.controller, g.metric) == (scenario, controller, metric):
                return g
        raise KeyError(f"no group stats for {(scenario, controller, metric)}")


def build_report(episodes: Sequence[dict], controllers: Sequence[str],
                 mw_pair: tuple[str, str] = ("mpc", "rulebased")) -> StatsReport:
    """Aggregate per-episode records into filtered group stats and tests.

    ``episodes`` entries need keys scenario, controller, t_end, ttc_avg,
    dst_avg.  Kruskal-Wallis runs per (scenario, metric) across all listed
    controllers on the IQR-filtered values; Mann-Whitney compares ``mw_pair``.
    """
    scenarios = sorted({e["scenario"] for e in episodes})
    groups: list[GroupStats] = []
    comparisons: list[ComparisonStats] = []
    for scenario in scenarios:
        for metric in EPISODE_METRICS:
            filtered: dict[str, np.ndarray] = {}
            for controller in controllers:
                values = [e[metric] for e in episodes
                          if e["scenario"] == scenario and e["controller"] == controller]
                if not values:
                    continue
                res = iqr_filter(values)
                filtered[controller] = res.kept
                kept = res.kept
                groups.append(GroupStats(
                    scenario=scenario, controller=controller, metric=metric,
                    n_total=len(values), n_kept=kept.size,
                    mean=float(np.mean(kept)),
                    std=float(np.std(kept, ddof=1)) if kept.size > 1 else math.nan,
                    undersized=res.undersized,
                ))
            if len(filtered) >= 2:
                kw = kruskal_wallis(list(filtered.values()))
                if mw_pair[0] in filtered and mw_pair[1] in filtered:
                    mw = mann_whitney(filtered[mw_pair[0]], filtered[mw_pair[1]])
                    u_mw, p_mw = mw.u, mw.p
                else:
                    u_mw, p_mw = math.nan, math.nan
                comparisons.append(ComparisonStats(
                    scenario=scenario, metric=metric,
                    h=kw.h, p_kw=kw.p, mw_pair=mw_pair, u_mw=u_mw, p_mw=p_mw,
                ))
    return StatsReport(groups=groups, comparisons=comparisons)


def format_table(report: StatsReport, controllers: Sequence[str]) -> str:
    """Plain-text summary: mean +/- std per controller, H and p per metric row."""
    lines: list[str] = []
    scenarios = sorted({g.scenario for g in report.groups})
    for scenario in scenarios:
        lines.append(f"scenario: {scenario}")
        header = f"  {'metric':<9}"
        for c in controllers:
            header += f"{c:>22}"
        header += f"{'H':>10}{'p(KW)':>12}{'p(MW)':>12}"
        lines.append(header)
        for metric in EPISODE_METRICS:
            row = f"  {metric:<9}"
            for c in controllers:
                try:
                    g = report.group(scenario, c, metric)
                    cell = f"{g.mean:.2f} +/- {g.std:.2f} ({g.n_kept})"
                except KeyError:
                    cell = "-"
                row += f"{cell:>22}"
            comp = next((x for x in report.comparisons
                         if x.scenario == scenario and x.metric == metric), None)
            if comp is not None:
                row += f"{comp.h:>10.2f}{comp.p_kw:>12.3g}{comp.p_mw:>12.3g}"
            lines.append(row)
        lines.append("")
    return "\n".join(lines)
