"""Exploration sessions: focused insights, constraints, and saved state.

A session's state is an immutable snapshot; focus and unfocus return new
states with per-class recommendations recomputed. While nothing is focused,
each class recommends its default ranking. Once insights are focused,
candidates are reordered by their mean similarity to the focused set, so the
carousel drifts toward what the analyst is already looking at.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from datetime import datetime, timezone

from . import query as q
from .classes import CLASS_SPECS, resolve_class
from .dataset import fingerprint
from .engine import Engine
from .errors import FingerprintMismatch, StateError
from .query import InsightDescriptor, InsightQuery, attribute_overlap, rank_insights

STATE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExplorationState:
    dataset_name: str
    dataset_fingerprint: str
    focus_list: tuple[InsightDescriptor, ...]
    class_constraints: tuple[tuple[str, InsightQuery], ...]
    recommendations: tuple[tuple[str, tuple[InsightDescriptor, ...]], ...]
    created: str
    modified: str

    def constraint_for(self, class_id: str) -> InsightQuery | None:
        for cid, constraint in self.class_constraints:
            if cid == class_id:
                return constraint
        return None

    def recommendations_for(self, class_id: str) -> tuple[InsightDescriptor, ...]:
        for cid, descs in self.recommendations:
            if cid == class_id:
                return descs
        return ()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _same_insight(a: InsightDescriptor, b: InsightDescriptor) -> bool:
    # identity is the class plus the attribute tuple; the score is a view
    return a.class_id == b.class_id and tuple(a.attributes) == tuple(b.attributes)


def _similarity(
    cand: InsightDescriptor, focus: InsightDescriptor, spread: float
) -> float:
    overlap = attribute_overlap(tuple(cand.attributes), tuple(focus.attributes))
    if cand.class_id != focus.class_id:
        # metric values are not comparable across classes
        return overlap
    if spread > 0:
        return max(overlap, 1.0 - abs(cand.value - focus.value) / spread)
    return 1.0


def _focused_ranking(
    engine: Engine,
    constraint: InsightQuery,
    focus_list: tuple[InsightDescriptor, ...],
) -> tuple[InsightDescriptor, ...]:
    spec = resolve_class(constraint.class_id)
    q._validate(engine.dataset, spec, constraint)
    fixed = set(constraint.fixed)
    candidates = [
        t for t in q.enumerate_class(engine.dataset, spec) if fixed.issubset(t)
    ]
    use_sketch = engine.wants_sketch(spec, len(candidates), constraint.mode)
    descs = []
    for attrs in candidates:
        d = q._score(engine, spec, attrs, use_sketch)
        if d is None:
            continue
        if constraint.metric_range is not None:
            lo, hi = constraint.metric_range
            if not lo <= d.value <= hi:
                continue
        descs.append(d)
    values = [d.value for d in descs] + [
        f.value for f in focus_list if f.class_id == spec.class_id
    ]
    spread = max(values) - min(values) if values else 0.0

    def mean_similarity(d: InsightDescriptor) -> float:
        return sum(_similarity(d, f, spread) for f in focus_list) / len(focus_list)

    descs.sort(key=lambda d: (-mean_similarity(d), tuple(sorted(d.attributes))))
    return tuple(descs[: constraint.limit])


def _snapshot(
    engine: Engine,
    focus_list: tuple[InsightDescriptor, ...],
    constraints: tuple[tuple[str, InsightQuery], ...],
) -> tuple[tuple[str, tuple[InsightDescriptor, ...]], ...]:
    by_class = dict(constraints)
    out = []
    for class_id in CLASS_SPECS:
        constraint = by_class.get(class_id, InsightQuery(class_id))
        if focus_list:
            ranked = _focused_ranking(engine, constraint, focus_list)
        else:
            ranked = tuple(rank_insights(engine, constraint))
        out.append((class_id, ranked))
    return tuple(out)


def new_state(
    engine: Engine,
    constraints: dict[str, InsightQuery] | None = None,
) -> ExplorationState:
    """A fresh state over the engine's dataset, recommendations included."""
    pinned = tuple(sorted((constraints or {}).items(), key=lambda p: p[0]))
    for class_id, constraint in pinned:
        if constraint.class_id != class_id:
            raise StateError(
                f"constraint keyed {class_id!r} targets {constraint.class_id!r}"
            )
    now = _now()
    return ExplorationState(
        dataset_name=engine.dataset.name,
        dataset_fingerprint=fingerprint(engine.dataset),
        focus_list=(),
        class_constraints=pinned,
        recommendations=_snapshot(engine, (), pinned),
        created=now,
        modified=now,
    )


def _check_insight(engine: Engine, insight: InsightDescriptor) -> None:
    spec = resolve_class(insight.class_id)
    if len(insight.attributes) != spec.arity:
        raise StateError(
            f"{spec.class_id} insights carry {spec.arity} attribute(s), "
            f"got {len(insight.attributes)}"
        )
    for name in insight.attributes:
        ds = engine.dataset
        if not ds.has_column(name) or ds.column(name).kind != spec.column_kinds[0]:
            raise StateError(f"insight references stale attribute {name!r}")


def focus(
    engine: Engine, state: ExplorationState, insight: InsightDescriptor
) -> ExplorationState:
    """Append an insight to the focus list and recompute recommendations."""
    _check_insight(engine, insight)
    if any(_same_insight(insight, f) for f in state.focus_list):
        return state
    focus_list = state.focus_list + (insight,)
    return replace(
        state,
        focus_list=focus_list,
        recommendations=_snapshot(engine, focus_list, state.class_constraints),
        modified=_now(),
    )


def unfocus(
    engine: Engine, state: ExplorationState, insight: InsightDescriptor
) -> ExplorationState:
    """Drop an insight from the focus list; warns and no-ops when absent."""
    if not any(_same_insight(insight, f) for f in state.focus_list):
        warnings.warn(
            f"insight {insight.class_id}{tuple(insight.attributes)} is not focused",
            stacklevel=2,
        )
        return state
    focus_list = tuple(f for f in state.focus_list if not _same_insight(insight, f))
    return replace(
        state,
        focus_list=focus_list,
        recommendations=_snapshot(engine, focus_list, state.class_constraints),
        modified=_now(),
    )


def set_constraint(
    engine: Engine, state: ExplorationState, constraint: InsightQuery
) -> ExplorationState:
    """Pin or replace one class's query constraint and recompute."""
    resolved = resolve_class(constraint.class_id)
    kept = tuple(
        (cid, c) for cid, c in state.class_constraints if cid != resolved.class_id
    )
    updated = tuple(
        sorted(kept + ((resolved.class_id, constraint),), key=lambda p: p[0])
    )
    return replace(
        state,
        class_constraints=updated,
        recommendations=_snapshot(engine, state.focus_list, updated),
        modified=_now(),
    )


def clear_constraint(
    engine: Engine, state: ExplorationState, class_id: str
) -> ExplorationState:
    resolved = resolve_class(class_id)
    kept = tuple(
        (cid, c) for cid, c in state.class_constraints if cid != resolved.class_id
    )
    if kept == state.class_constraints:
        return state
    return replace(
        state,
        class_constraints=kept,
        recommendations=_snapshot(engine, state.focus_list, kept),
        modified=_now(),
    )


# ---- persistence


def _desc_to_doc(d: InsightDescriptor) -> dict:
    return {
        "class_id": d.class_id,
        "attributes": list(d.attributes),
        "metric_id": d.metric_id,
        "value": d.value,
        "approximate": d.approximate,
        "signed_aux": d.signed_aux,
    }


def _desc_from_doc(doc: dict) -> InsightDescriptor:
    return InsightDescriptor(
        class_id=doc["class_id"],
        attributes=tuple(doc["attributes"]),
        metric_id=doc["metric_id"],
        value=float(doc["value"]),
        approximate=bool(doc["approximate"]),
        signed_aux=None if doc["signed_aux"] is None else float(doc["signed_aux"]),
    )


def _query_to_doc(c: InsightQuery) -> dict:
    return {
        "class_id": c.class_id,
        "fixed": list(c.fixed),
        "metric_range": None if c.metric_range is None else list(c.metric_range),
        "limit": c.limit,
        "mode": c.mode,
        "order": c.order,
    }


def _query_from_doc(doc: dict) -> InsightQuery:
    rng = doc["metric_range"]
    return InsightQuery(
        class_id=doc["class_id"],
        fixed=tuple(doc["fixed"]),
        metric_range=None if rng is None else (float(rng[0]), float(rng[1])),
        limit=int(doc["limit"]),
        mode=doc["mode"],
        order=doc["order"],
    )


def save_state(state: ExplorationState) -> str:
    """Serialize to the versioned JSON document described in docs/state-schema.md."""
    # ordered lists, not objects, so sort_keys cannot scramble list order
    doc = {
        "schema_version": STATE_SCHEMA_VERSION,
        "dataset": {
            "name": state.dataset_name,
            "fingerprint": state.dataset_fingerprint,
        },
        "created": state.created,
        "modified": state.modified,
        "focus_list": [_desc_to_doc(d) for d in state.focus_list],
        "class_constraints": [
            {"class_id": cid, "query": _query_to_doc(c)}
            for cid, c in state.class_constraints
        ],
        "recommendations": [
            {"class_id": cid, "insights": [_desc_to_doc(d) for d in descs]}
            for cid, descs in state.recommendations
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def load_state(document: str | bytes, engine: Engine) -> ExplorationState:
    """Parse a saved state and bind it to the engine's dataset.

    The stored fingerprint must match the dataset exactly; the snapshot is
    restored as saved, not recomputed.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise StateError(f"malformed state document: {exc}") from exc
    if not isinstance(doc, dict):
        raise StateError("malformed state document: expected an object")
    version = doc.get("schema_version")
    if version != STATE_SCHEMA_VERSION:
        raise StateError(
            f"unsupported state schema version {version!r} "
            f"(this build reads version {STATE_SCHEMA_VERSION})"
        )
    try:
        ref = doc["dataset"]
        expected = fingerprint(engine.dataset)
        if ref["fingerprint"] != expected:
            raise FingerprintMismatch(
                f"state was saved for dataset {ref['name']!r} "
                f"(fingerprint {ref['fingerprint']}); this dataset has {expected}"
            )
        state = ExplorationState(
            dataset_name=ref["name"],
            dataset_fingerprint=ref["fingerprint"],
            focus_list=tuple(_desc_from_doc(d) for d in doc["focus_list"]),
            class_constraints=tuple(
                (entry["class_id"], _query_from_doc(entry["query"]))
                for entry in doc["class_constraints"]
            ),
            recommendations=tuple(
                (
                    entry["class_id"],
                    tuple(_desc_from_doc(d) for d in entry["insights"]),
                )
                for entry in doc["recommendations"]
            ),
            created=doc["created"],
            modified=doc["modified"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StateError(f"malformed state document: {exc!r}") from exc
    for insight in state.focus_list:
        _check_insight(engine, insight)
    return state
