"""The insight-class registry: what each class ranks, over which columns.

An insight class pairs a column-kind signature with a default ranking metric
and a visualization. The registry is the single source of truth consumed by
the query layer, the service, and the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import metrics
from .dataset import CATEGORICAL, NUMERIC
from .errors import QueryError

DISPERSION = "Dispersion"
SKEW = "Skew"
HEAVY_TAILS = "HeavyTails"
OUTLIERS = "Outliers"
HETEROGENEOUS_FREQUENCIES = "HeterogeneousFrequencies"
LINEAR_RELATIONSHIP = "LinearRelationship"
MONOTONIC_RELATIONSHIP = "MonotonicRelationship"

HISTOGRAM = "Histogram"
BOX_PLOT = "BoxPlot"
PARETO_CHART = "ParetoChart"
SCATTER_FIT = "ScatterWithFitLine"

DESCENDING = "Descending"
ASCENDING = "Ascending"


@dataclass(frozen=True)
class InsightClassSpec:
    class_id: str
    arity: int
    column_kinds: tuple[str, ...]
    metric_id: str
    viz_kind: str
    sort_order: str = DESCENDING
    # metrics whose sign is informative rank by magnitude
    rank_by_magnitude: bool = False

    def __post_init__(self) -> None:
        if self.arity != len(self.column_kinds):
            raise ValueError("arity disagrees with column kind signature")


CLASS_SPECS: dict[str, InsightClassSpec] = {
    spec.class_id: spec
    for spec in (
        InsightClassSpec(DISPERSION, 1, (NUMERIC,), metrics.VARIANCE, HISTOGRAM),
        InsightClassSpec(
            SKEW, 1, (NUMERIC,), metrics.SKEWNESS, HISTOGRAM, rank_by_magnitude=True
        ),
        InsightClassSpec(HEAVY_TAILS, 1, (NUMERIC,), metrics.KURTOSIS, HISTOGRAM),
        InsightClassSpec(OUTLIERS, 1, (NUMERIC,), metrics.OUTLIER_SCORE, BOX_PLOT),
        InsightClassSpec(
            HETEROGENEOUS_FREQUENCIES,
            1,
            (CATEGORICAL,),
            metrics.REL_FREQ_TOPK,
            PARETO_CHART,
        ),
        InsightClassSpec(
            LINEAR_RELATIONSHIP, 2, (NUMERIC, NUMERIC), metrics.PEARSON_ABS, SCATTER_FIT
        ),
        InsightClassSpec(
            MONOTONIC_RELATIONSHIP,
            2,
            (NUMERIC, NUMERIC),
            metrics.SPEARMAN_ABS,
            SCATTER_FIT,
        ),
    )
}

# command-line and URL friendly spellings
CLASS_ALIASES: dict[str, str] = {
    "dispersion": DISPERSION,
    "skew": SKEW,
    "heavy_tails": HEAVY_TAILS,
    "heavytails": HEAVY_TAILS,
    "outliers": OUTLIERS,
    "frequencies": HETEROGENEOUS_FREQUENCIES,
    "heterogeneous_frequencies": HETEROGENEOUS_FREQUENCIES,
    "linear": LINEAR_RELATIONSHIP,
    "monotonic": MONOTONIC_RELATIONSHIP,
}


def resolve_class(name: str) -> InsightClassSpec:
    """Look up a class by canonical id or alias; QueryError when unknown."""
    if name in CLASS_SPECS:
        return CLASS_SPECS[name]
    canonical = CLASS_ALIASES.get(name.lower())
    if canonical is None:
        known = ", ".join(sorted(CLASS_SPECS))
        raise QueryError(f"unknown insight class {name!r} (known: {known})")
    return CLASS_SPECS[canonical]


def pair_classes() -> list[InsightClassSpec]:
    return [s for s in CLASS_SPECS.values() if s.arity == 2]
