"""Evaluation engine: one dataset plus its precomputed summaries and sketches.

The engine decides, per query, whether a pairwise metric is answered exactly
or from sign-vector sketches (the Auto policy compares estimated multiply-add
cost against a budget), and serves cached per-column artifacts to the query,
session, service, and CLI layers.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

import numpy as np

from . import metrics
from .classes import InsightClassSpec
from .dataset import CATEGORICAL, NUMERIC, Column, Dataset, MomentSummary, moment_summary
from .errors import QueryError, SketchError
from .metrics import MetricValue, OutlierConfig
from .sketch import (
    HyperplaneConfig,
    HyperplaneSketch,
    SignVector,
    build_hyperplane_many,
    estimate_all_pairs,
    estimate_correlation,
    finalize,
)
from .sketch.hyperplane import default_width

AUTO = "auto"
EXACT = "exact"
SKETCH = "sketch"
MODES = (AUTO, EXACT, SKETCH)

DEFAULT_EXACT_BUDGET = 10_000_000

ProgressFn = Callable[[str, float], None]


class Engine:
    """Query-evaluation facade over an immutable dataset.

    Construction is cheap; summaries and sketches are built on first use or
    eagerly via precompute(). All cached artifacts are immutable, so one
    engine can serve concurrent readers.
    """

    def __init__(
        self,
        dataset: Dataset,
        *,
        k: int | None = None,
        seed: int = 0,
        exact_budget: int = DEFAULT_EXACT_BUDGET,
        outlier_config: OutlierConfig | None = None,
        summaries: Mapping[str, MomentSummary] | None = None,
    ):
        self.dataset = dataset
        self.k = k if k is not None else default_width(dataset.n_rows)
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self.exact_budget = exact_budget
        self.outlier_config = outlier_config or OutlierConfig()
        self._summaries: dict[str, MomentSummary] = dict(summaries or {})
        self._sketches: dict[str, HyperplaneSketch] | None = None
        self._signs: dict[str, SignVector] = {}

    @property
    def config(self) -> HyperplaneConfig:
        return HyperplaneConfig(k=self.k, seed=self.seed)

    # ---- cached artifacts

    def summary(self, name: str) -> MomentSummary:
        if name not in self._summaries:
            self._summaries[name] = moment_summary(self.dataset.column(name))
        return self._summaries[name]

    def sketches(self) -> dict[str, HyperplaneSketch]:
        """Hyperplane sketches for every numeric column, built in one pass."""
        if self._sketches is None:
            cols = self.dataset.numeric_columns()
            built = build_hyperplane_many(cols, self.config)
            self._sketches = {s.column_id: s for s in built}
        return self._sketches

    def attach_sketches(self, sketches: Mapping[str, HyperplaneSketch]) -> None:
        """Adopt previously persisted sketches instead of rebuilding.

        They must match this engine's width and seed and cover whole columns.
        """
        for name, s in sketches.items():
            if s.k != self.k or s.seed != self.seed:
                raise SketchError(
                    f"sketch for {name!r} was built with k={s.k}, seed={s.seed}; "
                    f"engine expects k={self.k}, seed={self.seed}"
                )
            if not self.dataset.has_column(name):
                raise SketchError(f"sketch for unknown column {name!r}")
            if s.row_count != self.dataset.column(name).n_valid:
                raise SketchError(f"sketch for {name!r} does not cover the column")
        self._sketches = dict(sketches)
        self._signs = {}

    def sign_vector(self, name: str) -> SignVector:
        if name not in self._signs:
            self._signs[name] = finalize(self.sketches()[name])
        return self._signs[name]

    def precompute(self, progress: ProgressFn | None = None) -> None:
        """Build everything queries need; reports coarse progress in [0, 1]."""
        report = progress or (lambda stage, frac: None)
        numeric = self.dataset.numeric_columns()
        report("summaries", 0.0)
        for i, col in enumerate(numeric):
            self.summary(col.name)
            report("summaries", (i + 1) / max(len(numeric), 1))
        report("sketches", 0.0)
        self.sketches()
        report("sketches", 0.5)
        for col in numeric:
            if self.sketches()[col.name].row_count:
                self.sign_vector(col.name)
        report("sketches", 1.0)
        report("done", 1.0)

    # ---- mode policy

    def wants_sketch(self, spec: InsightClassSpec, n_pairs: int, mode: str) -> bool:
        """Sketches only ever answer the linear-correlation metric; Auto
        switches once exact evaluation would exceed the multiply-add budget."""
        if mode not in MODES:
            raise QueryError(f"unknown mode {mode!r} (one of {', '.join(MODES)})")
        if spec.metric_id != metrics.PEARSON_ABS:
            return False
        if mode == SKETCH:
            return True
        if mode == EXACT:
            return False
        return self.dataset.n_rows * n_pairs > self.exact_budget

    # ---- metric evaluation

    def metric_value(
        self, spec: InsightClassSpec, attrs: Sequence[str], use_sketch: bool
    ) -> MetricValue:
        ds = self.dataset
        if spec.arity == 1:
            col = ds.column(attrs[0])
            if spec.metric_id == metrics.VARIANCE:
                return metrics.variance(self.summary(col.name))
            if spec.metric_id == metrics.SKEWNESS:
                return metrics.skewness(self.summary(col.name))
            if spec.metric_id == metrics.KURTOSIS:
                return metrics.kurtosis(self.summary(col.name))
            if spec.metric_id == metrics.OUTLIER_SCORE:
                return metrics.outlier_score(col, self.outlier_config)
            if spec.metric_id == metrics.REL_FREQ_TOPK:
                return metrics.rel_freq_topk(col)
            raise QueryError(f"no evaluator for metric {spec.metric_id!r}")
        x, y = ds.column(attrs[0]), ds.column(attrs[1])
        if spec.metric_id == metrics.SPEARMAN_ABS:
            return metrics.spearman(x, y)
        if spec.metric_id == metrics.PEARSON_ABS:
            if use_sketch:
                return self._sketch_pearson(x, y)
            return metrics.pearson(x, y)
        raise QueryError(f"no evaluator for metric {spec.metric_id!r}")

    def _sketch_pearson(self, x: Column, y: Column) -> MetricValue:
        # degenerate or starved columns are excluded from ranking exactly as
        # in exact mode, using the (always exact) per-column summaries
        if not self._sketchable(x) or not self._sketchable(y):
            return MetricValue(metrics.PEARSON_ABS, math.nan, 0, defined=False)
        est = estimate_correlation(self.sign_vector(x.name), self.sign_vector(y.name))
        support = min(x.n_valid, y.n_valid)
        return MetricValue(metrics.PEARSON_ABS, abs(est), support, signed=est)

    def _sketchable(self, col: Column) -> bool:
        if col.n_valid < metrics.MIN_SUPPORT_PAIRWISE:
            return False
        return metrics.variance(self.summary(col.name)).defined

    # ---- all-pairs support (overview, bench)

    def numeric_names(self) -> list[str]:
        return [c.name for c in self.dataset.numeric_columns()]

    def sketch_correlation_matrix(self) -> tuple[list[str], np.ndarray]:
        """Signed estimates for every numeric pair from the sign vectors.

        Undefined rows/columns (degenerate or starved) are NaN off-diagonal.
        """
        names = self.numeric_names()
        vectors = []
        usable = []
        for n in names:
            col = self.dataset.column(n)
            usable.append(self._sketchable(col) and self.sketches()[n].row_count > 0)
        est = np.full((len(names), len(names)), np.nan)
        live_idx = [i for i, ok in enumerate(usable) if ok]
        if live_idx:
            vectors = [self.sign_vector(names[i]) for i in live_idx]
            sub = estimate_all_pairs(vectors)
            est[np.ix_(live_idx, live_idx)] = sub
        np.fill_diagonal(est, 1.0)
        return names, est

    def exact_correlation_matrix(self) -> tuple[list[str], np.ndarray]:
        """Signed exact Pearson for every numeric pair via masked mat-muls.

        This is the brute-force baseline the bench command times; entries are
        NaN where a pair is undefined (low joint support or degenerate).
        """
        names = self.numeric_names()
        cols = [self.dataset.column(n) for n in names]
        n = self.dataset.n_rows
        d = len(cols)
        if d == 0:
            return names, np.zeros((0, 0))
        a = np.empty((n, d))
        m = np.empty((n, d))
        for i, c in enumerate(cols):
            a[:, i] = np.where(c.valid, c.values, 0.0)
            m[:, i] = c.valid
        counts = m.T @ m
        sx = a.T @ m  # sx[i, j] = sum of column i over rows jointly valid with j
        sxx = (a * a).T @ m
        sxy = a.T @ a
        ranges = np.array(
            [
                (self.summary(nm).value_range if self.dataset.column(nm).n_valid else 0.0)
                for nm in names
            ]
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            mean_ij = sx / counts
            var_ij = sxx / counts - mean_ij**2
            cov = sxy / counts - mean_ij * mean_ij.T
            rho = np.clip(cov / np.sqrt(var_ij * var_ij.T), -1.0, 1.0)
            degenerate_pair = (
                var_ij <= metrics.DEGENERACY_REL_TOL * ranges[:, None] ** 2
            ) | (var_ij.T <= metrics.DEGENERACY_REL_TOL * ranges[None, :] ** 2)
        rho[(counts < metrics.MIN_SUPPORT_PAIRWISE) | degenerate_pair] = np.nan
        np.fill_diagonal(rho, 1.0)
        return names, rho
