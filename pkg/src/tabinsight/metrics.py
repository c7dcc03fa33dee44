"""Exact ranking metrics for single columns and column pairs.

Single-column moment metrics (variance, skewness, kurtosis) are derived from
power sums so they can be answered from a merged MomentSummary without
revisiting the data. Pairwise metrics recompute from the jointly valid rows.

Every function returns a MetricValue; values that fail their support or
degeneracy preconditions come back with defined=False and are excluded from
ranking rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import CATEGORICAL, NUMERIC, Column, MomentSummary

VARIANCE = "Variance"
SKEWNESS = "Skewness"
KURTOSIS = "Kurtosis"
OUTLIER_SCORE = "OutlierScore"
REL_FREQ_TOPK = "RelFreqTopK"
PEARSON_ABS = "PearsonAbs"
SPEARMAN_ABS = "SpearmanAbs"

METRIC_IDS = (
    VARIANCE,
    SKEWNESS,
    KURTOSIS,
    OUTLIER_SCORE,
    REL_FREQ_TOPK,
    PEARSON_ABS,
    SPEARMAN_ABS,
)

# A column whose variance is this small relative to its squared range is
# treated as constant: excluded from moment rankings instead of producing
# noise-driven skew/kurtosis values.
DEGENERACY_REL_TOL = 1e-12

MIN_SUPPORT_VARIANCE = 2
MIN_SUPPORT_SKEWNESS = 3
MIN_SUPPORT_KURTOSIS = 4
MIN_SUPPORT_PAIRWISE = 3

DEFAULT_TOPK = 3


@dataclass(frozen=True)
class MetricValue:
    """One computed metric: id, value, how many rows backed it, and validity.

    signed carries the directional companion where one exists (signed
    correlation, signed skew); value itself follows each metric's contract.
    """

    metric_id: str
    value: float
    support: int
    defined: bool = True
    signed: float | None = None


@dataclass(frozen=True)
class OutlierConfig:
    detector: str = "ZScoreThreshold"
    z_threshold: float = 3.0

    def __post_init__(self) -> None:
        if self.detector != "ZScoreThreshold":
            raise ValueError(f"unknown outlier detector {self.detector!r}")
        if not self.z_threshold > 0:
            raise ValueError("z_threshold must be positive")


def _undefined(metric_id: str, support: int, value: float = math.nan) -> MetricValue:
    return MetricValue(metric_id=metric_id, value=value, support=support, defined=False)


def _is_degenerate(var: float, value_range: float) -> bool:
    return var <= DEGENERACY_REL_TOL * value_range * value_range


def _central_moments(s: MomentSummary) -> tuple[float, float, float, float]:
    """mean and the 2nd..4th central moments, from power sums."""
    n = s.count
    mu = s.sum1 / n
    m2 = s.sum2 / n - mu * mu
    m3 = s.sum3 / n - 3.0 * mu * (s.sum2 / n) + 2.0 * mu**3
    m4 = s.sum4 / n - 4.0 * mu * (s.sum3 / n) + 6.0 * mu * mu * (s.sum2 / n) - 3.0 * mu**4
    return mu, max(m2, 0.0), m3, m4


def variance(s: MomentSummary) -> MetricValue:
    """Population variance. Degenerate (constant) columns report 0, undefined."""
    if s.count < MIN_SUPPORT_VARIANCE:
        return _undefined(VARIANCE, s.count)
    _, m2, _, _ = _central_moments(s)
    if _is_degenerate(m2, s.value_range):
        return MetricValue(VARIANCE, 0.0, s.count, defined=False)
    return MetricValue(VARIANCE, m2, s.count)


def skewness(s: MomentSummary) -> MetricValue:
    """Standardized third moment, signed. Rankings take the magnitude."""
    if s.count < MIN_SUPPORT_SKEWNESS:
        return _undefined(SKEWNESS, s.count)
    _, m2, m3, _ = _central_moments(s)
    if _is_degenerate(m2, s.value_range):
        return _undefined(SKEWNESS, s.count)
    g1 = m3 / m2**1.5
    return MetricValue(SKEWNESS, g1, s.count, signed=g1)


def kurtosis(s: MomentSummary) -> MetricValue:
    """Raw (non-excess) standardized fourth moment; 3 for a normal population."""
    if s.count < MIN_SUPPORT_KURTOSIS:
        return _undefined(KURTOSIS, s.count)
    _, m2, _, m4 = _central_moments(s)
    if _is_degenerate(m2, s.value_range):
        return _undefined(KURTOSIS, s.count)
    return MetricValue(KURTOSIS, m4 / (m2 * m2), s.count)


def outlier_score(c: Column, cfg: OutlierConfig | None = None) -> MetricValue:
    """Mean standardized distance of z-threshold outliers; 0 when none flagged."""
    if c.kind != NUMERIC:
        raise ValueError(f"column {c.name!r} is not numeric")
    cfg = cfg or OutlierConfig()
    x = c.valid_values()
    n = x.size
    if n < MIN_SUPPORT_VARIANCE:
        return _undefined(OUTLIER_SCORE, n)
    mu = x.mean()
    m2 = float(((x - mu) ** 2).mean())
    rng = float(x.max() - x.min())
    if _is_degenerate(m2, rng):
        return _undefined(OUTLIER_SCORE, n)
    z = np.abs(x - mu) / math.sqrt(m2)
    flagged = z[z > cfg.z_threshold]
    score = float(flagged.mean()) if flagged.size else 0.0
    return MetricValue(OUTLIER_SCORE, score, n)


def rel_freq_topk(c: Column, k: int = DEFAULT_TOPK) -> MetricValue:
    """Combined relative frequency of the k most frequent categories."""
    if c.kind != CATEGORICAL:
        raise ValueError(f"column {c.name!r} is not categorical")
    if k < 1:
        raise ValueError("k must be at least 1")
    codes = c.valid_values()
    n = codes.size
    if n == 0:
        return _undefined(REL_FREQ_TOPK, 0)
    counts = np.bincount(codes, minlength=len(c.dictionary))
    top = np.sort(counts)[::-1][:k]
    return MetricValue(REL_FREQ_TOPK, float(top.sum()) / n, n)


def _joint_values(x: Column, y: Column) -> tuple[np.ndarray, np.ndarray]:
    if x.kind != NUMERIC or y.kind != NUMERIC:
        raise ValueError("pairwise metrics need two numeric columns")
    if x.n_rows != y.n_rows:
        raise ValueError("columns come from different datasets")
    both = x.valid & y.valid
    return x.values[both], y.values[both]


def _pearson_of(xv: np.ndarray, yv: np.ndarray, metric_id: str) -> MetricValue:
    n = xv.size
    if n < MIN_SUPPORT_PAIRWISE:
        return _undefined(metric_id, n)
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    vx = float((xc * xc).mean())
    vy = float((yc * yc).mean())
    if _is_degenerate(vx, float(xv.max() - xv.min())) or _is_degenerate(
        vy, float(yv.max() - yv.min())
    ):
        return _undefined(metric_id, n)
    rho = float((xc * yc).mean()) / math.sqrt(vx * vy)
    rho = min(1.0, max(-1.0, rho))
    return MetricValue(metric_id, abs(rho), n, signed=rho)


def pearson(x: Column, y: Column) -> MetricValue:
    """|Pearson correlation| over jointly valid rows; signed value kept alongside."""
    xv, yv = _joint_values(x, y)
    return _pearson_of(xv, yv, PEARSON_ABS)


def midranks(v: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average rank of their group."""
    v = np.asarray(v)
    order = np.argsort(v, kind="stable")
    sv = v[order]
    boundaries = np.flatnonzero(sv[1:] != sv[:-1]) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [sv.size]))
    group_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(sv.size, dtype=np.float64)
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def spearman(x: Column, y: Column) -> MetricValue:
    """|rank correlation|: Pearson applied to midranks of the joint rows."""
    xv, yv = _joint_values(x, y)
    if xv.size < MIN_SUPPORT_PAIRWISE:
        return _undefined(SPEARMAN_ABS, xv.size)
    return _pearson_of(midranks(xv), midranks(yv), SPEARMAN_ABS)
