"""Ranked insight queries: enumerate, score, filter, and order attribute tuples.

Everything here is deterministic: candidate tuples are generated in dataset
column order, scores come from the engine, and ties are broken by the
lexicographic order of the attribute-name tuple so results never depend on
dict iteration or float ambiguity.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import metrics
from .classes import ASCENDING, DESCENDING, InsightClassSpec, resolve_class
from .dataset import Dataset
from .engine import AUTO, MODES, Engine
from .errors import QueryError


@dataclass(frozen=True)
class InsightQuery:
    """A single ranked request against one insight class.

    fixed pins attribute names that every returned tuple must contain;
    metric_range keeps only scores inside [lo, hi]; order overrides the
    class's native sort direction when set.
    """

    class_id: str
    fixed: tuple[str, ...] = ()
    metric_range: tuple[float, float] | None = None
    limit: int = 10
    mode: str = AUTO
    order: str | None = None


@dataclass(frozen=True)
class InsightDescriptor:
    """One scored insight: a class, its attribute tuple, and the rank value.

    value is the quantity the ranking sorted on (magnitude for signed
    metrics); signed_aux preserves the sign when the metric has one.
    approximate is True only when the score came from a sketch.
    """

    class_id: str
    attributes: tuple[str, ...]
    metric_id: str
    value: float
    approximate: bool = False
    signed_aux: float | None = None


@dataclass(frozen=True)
class OverviewResult:
    """Class-wide snapshot: a signed matrix for pair classes (unit diagonal,
    None where undefined), or a per-attribute list for unary classes."""

    class_id: str
    metric_id: str
    kind: str  # "matrix" | "list"
    attributes: tuple[str, ...]
    matrix: tuple[tuple[float | None, ...], ...] | None = None
    values: tuple[float | None, ...] | None = None
    approximate: bool = False


def enumerate_class(
    ds: Dataset, spec: InsightClassSpec | str
) -> list[tuple[str, ...]]:
    """All attribute tuples of the class's arity and kinds, in column order.

    Pairs are unordered: each is emitted once with indices ascending.
    """
    if isinstance(spec, str):
        spec = resolve_class(spec)
    eligible = [c.name for c in ds.columns if c.kind == spec.column_kinds[0]]
    if spec.arity == 1:
        return [(name,) for name in eligible]
    return list(itertools.combinations(eligible, 2))


def _validate(ds: Dataset, spec: InsightClassSpec, query: InsightQuery) -> None:
    if query.limit < 1:
        raise QueryError(f"limit must be positive, got {query.limit}")
    if query.mode not in MODES:
        raise QueryError(f"unknown mode {query.mode!r} (one of {', '.join(MODES)})")
    if query.order is not None and query.order not in (ASCENDING, DESCENDING):
        raise QueryError(f"order must be {ASCENDING!r} or {DESCENDING!r}")
    if query.metric_range is not None:
        lo, hi = query.metric_range
        if not lo <= hi:
            raise QueryError(f"empty metric range [{lo}, {hi}]")
    if len(set(query.fixed)) != len(query.fixed):
        raise QueryError("fixed attributes must be distinct")
    if len(query.fixed) > spec.arity:
        raise QueryError(
            f"{spec.class_id} takes {spec.arity} attribute(s); cannot fix {len(query.fixed)}"
        )
    for name in query.fixed:
        if not ds.has_column(name):
            raise QueryError(f"unknown attribute {name!r}")
        if ds.column(name).kind != spec.column_kinds[0]:
            raise QueryError(
                f"attribute {name!r} is {ds.column(name).kind}; "
                f"{spec.class_id} needs {spec.column_kinds[0]}"
            )


def _score(
    engine: Engine, spec: InsightClassSpec, attrs: tuple[str, ...], use_sketch: bool
) -> InsightDescriptor | None:
    mv = engine.metric_value(spec, attrs, use_sketch)
    if not mv.defined:
        return None
    value = abs(mv.value) if spec.rank_by_magnitude else mv.value
    return InsightDescriptor(
        class_id=spec.class_id,
        attributes=attrs,
        metric_id=spec.metric_id,
        value=value,
        approximate=use_sketch and spec.metric_id == metrics.PEARSON_ABS,
        signed_aux=mv.signed,
    )


def _tie_key(d: InsightDescriptor) -> tuple[str, ...]:
    # name-sorted, so tied tuples order the same no matter how the input
    # file happened to order its columns
    return tuple(sorted(d.attributes))


def _sort_key(order: str):
    if order == DESCENDING:
        return lambda d: (-d.value, _tie_key(d))
    return lambda d: (d.value, _tie_key(d))


def rank_insights(engine: Engine, query: InsightQuery) -> list[InsightDescriptor]:
    """Evaluate one query and return at most query.limit descriptors."""
    spec = resolve_class(query.class_id)
    _validate(engine.dataset, spec, query)
    fixed = set(query.fixed)
    candidates = [
        t for t in enumerate_class(engine.dataset, spec) if fixed.issubset(t)
    ]
    use_sketch = engine.wants_sketch(spec, len(candidates), query.mode)
    scored = []
    for attrs in candidates:
        d = _score(engine, spec, attrs, use_sketch)
        if d is None:
            continue
        if query.metric_range is not None:
            lo, hi = query.metric_range
            if not lo <= d.value <= hi:
                continue
        scored.append(d)
    scored.sort(key=_sort_key(query.order or spec.sort_order))
    return scored[: query.limit]


def describe_insight(
    engine: Engine,
    class_id: str,
    attributes: Sequence[str],
    *,
    use_sketch: bool = False,
) -> InsightDescriptor:
    """Score a single known attribute tuple under its class's metric.

    This is the point lookup behind focusing a card: the tuple must fit the
    class (arity, kinds, distinct, existing) and the metric must be defined
    on it, otherwise QueryError.
    """
    spec = resolve_class(class_id)
    attrs = tuple(attributes)
    if len(attrs) != spec.arity:
        raise QueryError(
            f"{spec.class_id} takes {spec.arity} attribute(s), got {len(attrs)}"
        )
    if len(set(attrs)) != len(attrs):
        raise QueryError("attributes must be distinct")
    ds = engine.dataset
    for name, kind in zip(attrs, spec.column_kinds):
        if not ds.has_column(name):
            raise QueryError(f"unknown attribute {name!r}")
        if ds.column(name).kind != kind:
            raise QueryError(
                f"{spec.class_id} expects a {kind} column, {name!r} is not one"
            )
    d = _score(engine, spec, attrs, use_sketch)
    if d is None:
        raise QueryError(f"{spec.metric_id} is undefined on {attrs}")
    return d


def _all_descriptors(engine: Engine, spec: InsightClassSpec) -> list[InsightDescriptor]:
    out = []
    for attrs in enumerate_class(engine.dataset, spec):
        d = _score(engine, spec, attrs, use_sketch=False)
        if d is not None:
            out.append(d)
    return out


def attribute_overlap(a: tuple[str, ...], b: tuple[str, ...]) -> float:
    """Shared attributes as a fraction of the larger tuple's arity."""
    if not a or not b:
        return 0.0
    return len(set(a) & set(b)) / max(len(a), len(b))


def neighborhood_scored(
    engine: Engine, focus: InsightDescriptor, limit: int = 10
) -> list[tuple[InsightDescriptor, float]]:
    """Same-class neighbors of a focus insight with their similarity scores.

    Similarity is the larger of attribute overlap and metric proximity, each
    in [0, 1]; proximity normalizes the value gap by the class's value range.
    """
    if limit < 1:
        raise QueryError(f"limit must be positive, got {limit}")
    spec = resolve_class(focus.class_id)
    ds = engine.dataset
    if len(focus.attributes) != spec.arity:
        raise QueryError(
            f"focus for {spec.class_id} needs {spec.arity} attribute(s), "
            f"got {len(focus.attributes)}"
        )
    for name in focus.attributes:
        if not ds.has_column(name) or ds.column(name).kind != spec.column_kinds[0]:
            raise QueryError(
                f"focus attribute {name!r} is not a {spec.column_kinds[0]} "
                f"column of this dataset"
            )
    everyone = _all_descriptors(engine, spec)
    others = [d for d in everyone if d.attributes != tuple(focus.attributes)]
    values = [d.value for d in everyone] + [focus.value]
    spread = max(values) - min(values) if values else 0.0
    scored = []
    for d in others:
        overlap = attribute_overlap(tuple(focus.attributes), d.attributes)
        if spread > 0:
            proximity = 1.0 - abs(focus.value - d.value) / spread
        else:
            proximity = 1.0
        scored.append((d, max(overlap, proximity)))
    scored.sort(key=lambda pair: (-pair[1], _tie_key(pair[0])))
    return scored[:limit]


def neighborhood(
    engine: Engine, focus: InsightDescriptor, limit: int = 10
) -> list[InsightDescriptor]:
    return [d for d, _ in neighborhood_scored(engine, focus, limit)]


def overview(engine: Engine, class_id: str, mode: str = AUTO) -> OverviewResult:
    """Whole-class snapshot: signed pair matrix or unary value list."""
    spec = resolve_class(class_id)
    if mode not in MODES:
        raise QueryError(f"unknown mode {mode!r} (one of {', '.join(MODES)})")
    if spec.arity == 1:
        names = tuple(a for (a,) in enumerate_class(engine.dataset, spec))
        vals: list[float | None] = []
        for name in names:
            mv = engine.metric_value(spec, (name,), use_sketch=False)
            if mv.defined:
                vals.append(mv.signed if mv.signed is not None else mv.value)
            else:
                vals.append(None)
        return OverviewResult(
            class_id=spec.class_id,
            metric_id=spec.metric_id,
            kind="list",
            attributes=names,
            values=tuple(vals),
        )
    n_pairs = len(enumerate_class(engine.dataset, spec))
    use_sketch = engine.wants_sketch(spec, n_pairs, mode)
    if use_sketch:
        names, mat = engine.sketch_correlation_matrix()
    elif spec.metric_id == metrics.PEARSON_ABS:
        names, mat = engine.exact_correlation_matrix()
    else:
        names = engine.numeric_names()
        mat = _pairwise_matrix(engine, spec, names)
    rows = tuple(
        tuple(float(v) if math.isfinite(v) else None for v in row) for row in mat
    )
    return OverviewResult(
        class_id=spec.class_id,
        metric_id=spec.metric_id,
        kind="matrix",
        attributes=tuple(names),
        matrix=rows,
        approximate=use_sketch,
    )


def _pairwise_matrix(engine: Engine, spec: InsightClassSpec, names: list[str]):
    mat = np.full((len(names), len(names)), np.nan)
    np.fill_diagonal(mat, 1.0)
    for i, j in itertools.combinations(range(len(names)), 2):
        mv = engine.metric_value(spec, (names[i], names[j]), use_sketch=False)
        if mv.defined:
            signed = mv.signed if mv.signed is not None else mv.value
            mat[i, j] = mat[j, i] = signed
    return mat
