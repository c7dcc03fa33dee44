"""Scikit-learn style facades over the engine.

These exist so the engine drops into sklearn pipelines and tooling:
parameters live on __init__, fit(X) validates input and sets trailing
underscore attributes, get_params/set_params round trip. The native API
(Dataset, Engine, rank_insights) stays the richer surface; these wrap the
numeric-matrix corner of it.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .classes import CLASS_SPECS, resolve_class
from .dataset import NUMERIC, Column, Dataset
from .engine import AUTO, MODES, Engine
from .query import InsightQuery, rank_insights


def _dataset_from_matrix(X: np.ndarray, names) -> Dataset:
    cols = []
    for j, name in enumerate(names):
        vals = np.ascontiguousarray(X[:, j], dtype=np.float64)
        valid = np.isfinite(vals)
        vals = np.where(valid, vals, 0.0)
        cols.append(Column(name=name, kind=NUMERIC, values=vals, valid=valid))
    return Dataset(name="matrix", columns=tuple(cols), n_rows=X.shape[0])


def _feature_names(raw, n_features: int) -> tuple[list[str], bool]:
    """Column labels, plus whether they came from the input itself."""
    if (
        raw is not None
        and len(raw) == n_features
        and all(isinstance(c, str) for c in raw)
    ):
        return list(raw), True
    return [f"x{j}" for j in range(n_features)], False


class SketchedCorrelation(BaseEstimator):
    """All-pairs correlation matrix, exact or estimated from sign sketches.

    Parameters
    ----------
    k : int or None
        Sign bits per column; None picks the width rule for the row count.
    seed : int
        Seed for the hyperplane directions.
    mode : {"auto", "exact", "sketch"}
        "auto" switches to sketches once rows x pairs crosses the budget.

    Attributes
    ----------
    correlation_ : ndarray of shape (n_features, n_features)
        Symmetric with unit diagonal; NaN marks undefined pairs.
    approximate_ : bool
        True when the sketch path produced the matrix.
    """

    def __init__(self, k: int | None = None, seed: int = 0, mode: str = AUTO):
        self.k = k
        self.seed = seed
        self.mode = mode

    def fit(self, X, y=None):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {sorted(MODES)}, got {self.mode!r}")
        raw_names = getattr(X, "columns", None)
        X = check_array(
            X, dtype=np.float64, ensure_all_finite=False, ensure_min_features=2
        )
        names, named = _feature_names(raw_names, X.shape[1])
        self.n_features_in_ = X.shape[1]
        if named:
            self.feature_names_in_ = np.asarray(names, dtype=object)
        engine = Engine(_dataset_from_matrix(X, names), k=self.k, seed=self.seed)
        spec = CLASS_SPECS["LinearRelationship"]
        d = X.shape[1]
        use_sketch = engine.wants_sketch(spec, d * (d - 1) // 2, self.mode)
        if use_sketch:
            _, self.correlation_ = engine.sketch_correlation_matrix()
        else:
            _, self.correlation_ = engine.exact_correlation_matrix()
        self.approximate_ = bool(use_sketch)
        self.engine_ = engine
        return self

    def score(self, X, y=None):
        """Mean absolute off-diagonal correlation of X under the fitted mode."""
        check_is_fitted(self, "correlation_")
        other = SketchedCorrelation(k=self.k, seed=self.seed, mode=self.mode).fit(X)
        m = other.correlation_
        off = m[~np.eye(m.shape[0], dtype=bool)]
        return float(np.nanmean(np.abs(off)))


class InsightRecommender(BaseEstimator):
    """Ranked insight descriptors per class for a numeric matrix.

    fit(X) runs every requested insight class and stores the ranked
    descriptors; recommendations_ maps class id to the ranked list.
    """

    def __init__(
        self,
        classes: list[str] | None = None,
        limit: int = 10,
        mode: str = AUTO,
        k: int | None = None,
        seed: int = 0,
    ):
        self.classes = classes
        self.limit = limit
        self.mode = mode
        self.k = k
        self.seed = seed

    def fit(self, X, y=None):
        raw_names = getattr(X, "columns", None)
        X = check_array(X, dtype=np.float64, ensure_all_finite=False)
        names, named = _feature_names(raw_names, X.shape[1])
        self.n_features_in_ = X.shape[1]
        if named:
            self.feature_names_in_ = np.asarray(names, dtype=object)
        engine = Engine(_dataset_from_matrix(X, names), k=self.k, seed=self.seed)
        requested = (
            list(CLASS_SPECS) if self.classes is None else list(self.classes)
        )
        recommendations = {}
        for class_id in requested:
            spec = resolve_class(class_id)
            if spec.column_kinds[0] != NUMERIC:
                recommendations[spec.class_id] = []
                continue
            recommendations[spec.class_id] = rank_insights(
                engine,
                InsightQuery(class_id=spec.class_id, limit=self.limit, mode=self.mode),
            )
        self.recommendations_ = recommendations
        self.engine_ = engine
        return self

    def top(self, class_id: str) -> list:
        """The fitted ranking for one class (id or alias)."""
        check_is_fitted(self, "recommendations_")
        return self.recommendations_[resolve_class(class_id).class_id]
