"""HTTP service: dataset uploads, queries, visualizations, and sessions.

Routes and body shapes are documented in docs/api.md. Uploads kick off an
asynchronous precompute (summaries, then sketches) whose progress can be
polled; everything else reads from a ready engine, so repeating a read
returns an identical body. Every error body carries exactly one of the four
ApiError codes.
"""

from __future__ import annotations

import itertools
import json
import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import session as sessions
from .classes import CLASS_SPECS, resolve_class
from .dataset import Dataset, ingest_csv
from .engine import AUTO, MODES, Engine
from .errors import (
    FingerprintMismatch,
    IngestError,
    NotReadyError,
    QueryError,
    SketchError,
    StateError,
    TabinsightError,
)
from .query import InsightDescriptor, InsightQuery, describe_insight, overview, rank_insights
from .store import open_store
from .viz import VisualizationPayload, build_payload

API_SCHEMA_VERSION = 1
MAX_PAGE_LIMIT = 50

BAD_REQUEST = "BadRequest"
NOT_FOUND = "NotFound"
CONFLICT = "Conflict"
INTERNAL = "Internal"
_STATUS = {BAD_REQUEST: 400, NOT_FOUND: 404, CONFLICT: 409, INTERNAL: 500}


class ApiError(Exception):
    """Carries one of the four wire codes plus a human-readable message."""

    def __init__(self, code: str, message: str, detail: Any = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.detail = detail


def _code_for(exc: TabinsightError) -> str:
    if isinstance(exc, FingerprintMismatch):
        return CONFLICT
    if isinstance(exc, NotReadyError):
        return CONFLICT
    if isinstance(exc, (QueryError, StateError, IngestError, SketchError)):
        return BAD_REQUEST
    return INTERNAL


# ---- registry


@dataclass
class DatasetEntry:
    dataset_id: str
    engine: Engine
    status: str  # precomputing | ready | failed
    stage: str = "queued"
    progress: float = 0.0
    error: str | None = None
    sketch_meta: dict | None = None


@dataclass
class SessionEntry:
    session_id: str
    dataset_id: str
    state: sessions.ExplorationState
    lock: threading.Lock = field(default_factory=threading.Lock)


class Registry:
    """All live datasets and sessions; append-only for datasets."""

    def __init__(self) -> None:
        self.datasets: dict[str, DatasetEntry] = {}
        self.sessions: dict[str, SessionEntry] = {}
        self._dataset_ids = itertools.count(1)
        self._session_ids = itertools.count(1)
        self._lock = threading.Lock()

    def add_dataset(self, engine: Engine, *, status: str, sketch_meta=None) -> DatasetEntry:
        with self._lock:
            entry = DatasetEntry(
                dataset_id=f"d{next(self._dataset_ids)}",
                engine=engine,
                status=status,
                stage="done" if status == "ready" else "queued",
                progress=1.0 if status == "ready" else 0.0,
                sketch_meta=sketch_meta,
            )
            self.datasets[entry.dataset_id] = entry
            return entry

    def add_session(self, dataset_id: str, state: sessions.ExplorationState) -> SessionEntry:
        with self._lock:
            entry = SessionEntry(
                session_id=f"s{next(self._session_ids)}",
                dataset_id=dataset_id,
                state=state,
            )
            self.sessions[entry.session_id] = entry
            return entry

    def dataset(self, dataset_id: str) -> DatasetEntry:
        entry = self.datasets.get(dataset_id)
        if entry is None:
            raise ApiError(NOT_FOUND, f"no dataset {dataset_id!r}")
        return entry

    def ready_engine(self, dataset_id: str) -> Engine:
        entry = self.dataset(dataset_id)
        if entry.status == "failed":
            raise ApiError(INTERNAL, f"precompute failed: {entry.error}")
        if entry.status != "ready":
            raise NotReadyError(f"dataset {dataset_id!r} is still precomputing")
        return entry.engine

    def session(self, session_id: str) -> SessionEntry:
        entry = self.sessions.get(session_id)
        if entry is None:
            raise ApiError(NOT_FOUND, f"no session {session_id!r}")
        return entry


# ---- request bodies


class UploadRequest(BaseModel):
    name: str
    csv: str
    k: int | None = None
    seed: int = 0
    delimiter: str = ","
    null_token: str = ""


class QueryRequest(BaseModel):
    class_id: str
    fixed: list[str] = []
    metric_range: list[float] | None = None
    limit: int = 10
    mode: str = AUTO
    order: str | None = None

    def to_query(self) -> InsightQuery:
        if self.metric_range is not None and len(self.metric_range) != 2:
            raise ApiError(BAD_REQUEST, "metric_range must be [lo, hi]")
        if self.limit > MAX_PAGE_LIMIT:
            raise ApiError(
                BAD_REQUEST, f"limit {self.limit} exceeds the page cap {MAX_PAGE_LIMIT}"
            )
        return InsightQuery(
            class_id=self.class_id,
            fixed=tuple(self.fixed),
            metric_range=tuple(self.metric_range) if self.metric_range else None,
            limit=self.limit,
            mode=self.mode,
            order=self.order,
        )


class InsightRef(BaseModel):
    class_id: str
    attributes: list[str]


class ConstraintRequest(BaseModel):
    query: QueryRequest


# ---- response shaping


def _descriptor_doc(d: InsightDescriptor) -> dict:
    return {
        "class_id": d.class_id,
        "attributes": list(d.attributes),
        "metric_id": d.metric_id,
        "value": d.value,
        "approximate": d.approximate,
        "signed_aux": d.signed_aux,
    }


def _columns_doc(ds: Dataset) -> list[dict]:
    return [{"name": c.name, "kind": c.kind} for c in ds.columns]


def _class_doc(spec) -> dict:
    return {
        "class_id": spec.class_id,
        "arity": spec.arity,
        "column_kinds": list(spec.column_kinds),
        "metric_id": spec.metric_id,
        "viz_kind": spec.viz_kind,
        "sort_order": spec.sort_order,
        "rank_by_magnitude": spec.rank_by_magnitude,
    }


def _dataset_doc(entry: DatasetEntry) -> dict:
    ds = entry.engine.dataset
    return {
        "schema_version": API_SCHEMA_VERSION,
        "dataset_id": entry.dataset_id,
        "name": ds.name,
        "status": entry.status,
        "stage": entry.stage,
        "progress": entry.progress,
        "error": entry.error,
        "n_rows": ds.n_rows,
        "columns": _columns_doc(ds),
        "sketch": entry.sketch_meta,
    }


def _series_doc(payload: VisualizationPayload) -> dict:
    s = payload.series
    if payload.viz_kind == "Histogram":
        return {"edges": list(s.edges), "counts": list(s.counts)}
    if payload.viz_kind == "BoxPlot":
        return {
            "minimum": s.minimum,
            "q1": s.q1,
            "median": s.median,
            "q3": s.q3,
            "maximum": s.maximum,
            "outliers": list(s.outliers),
        }
    if payload.viz_kind == "ParetoChart":
        return {
            "categories": list(s.categories),
            "frequencies": list(s.frequencies),
            "cumulative": list(s.cumulative),
        }
    return {
        "x": list(s.x),
        "y": list(s.y),
        "slope": s.slope,
        "intercept": s.intercept,
        "sampled": s.sampled,
    }


def _overview_doc(ov) -> dict:
    doc = {
        "schema_version": API_SCHEMA_VERSION,
        "class_id": ov.class_id,
        "metric_id": ov.metric_id,
        "kind": ov.kind,
        "attributes": list(ov.attributes),
        "approximate": ov.approximate,
    }
    if ov.kind == "matrix":
        doc["matrix"] = [list(row) for row in ov.matrix]
    else:
        doc["values"] = list(ov.values)
    return doc


def _session_doc(entry: SessionEntry, warnings_seen: list[str] | None = None) -> dict:
    return {
        "schema_version": API_SCHEMA_VERSION,
        "session_id": entry.session_id,
        "dataset_id": entry.dataset_id,
        "warnings": warnings_seen or [],
        "state": json.loads(sessions.save_state(entry.state)),
    }


# ---- app


def create_app(store_path: Path | str | None = None) -> FastAPI:
    """Build the service; store_path preloads one ready dataset (id d1)."""
    app = FastAPI(title="tabinsight", version=str(API_SCHEMA_VERSION))
    registry = Registry()
    app.state.registry = registry

    if store_path is not None:
        store = open_store(Path(store_path))
        try:
            engine = store.engine(require_sketches=True)
        except SketchError:
            engine = store.engine()
        registry.add_dataset(engine, status="ready", sketch_meta=store.sketch_meta)

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        body = {
            "schema_version": API_SCHEMA_VERSION,
            "error": {"code": exc.code, "message": exc.message, "detail": exc.detail},
        }
        return JSONResponse(status_code=_STATUS[exc.code], content=body)

    @app.exception_handler(TabinsightError)
    async def _engine_error(request: Request, exc: TabinsightError):
        code = _code_for(exc)
        body = {
            "schema_version": API_SCHEMA_VERSION,
            "error": {"code": code, "message": str(exc), "detail": None},
        }
        return JSONResponse(status_code=_STATUS[code], content=body)

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError):
        body = {
            "schema_version": API_SCHEMA_VERSION,
            "error": {
                "code": BAD_REQUEST,
                "message": "malformed request body",
                "detail": [
                    {"loc": list(e["loc"]), "msg": e["msg"], "type": e["type"]}
                    for e in exc.errors()
                ],
            },
        }
        return JSONResponse(status_code=400, content=body)

    def _precompute(entry: DatasetEntry) -> None:
        def progress(stage: str, frac: float) -> None:
            entry.stage = stage
            entry.progress = frac

        try:
            entry.engine.precompute(progress)
            cfg = entry.engine.config
            entry.sketch_meta = {"k": cfg.k, "seed": cfg.seed}
            entry.status = "ready"
        except Exception as exc:  # failure parks the dataset, service stays up
            entry.status = "failed"
            entry.error = str(exc)

    @app.get("/health")
    def health():
        return {"schema_version": API_SCHEMA_VERSION, "status": "ok"}

    @app.get("/classes")
    def classes():
        return {
            "schema_version": API_SCHEMA_VERSION,
            "classes": [_class_doc(spec) for spec in CLASS_SPECS.values()],
        }

    @app.post("/datasets", status_code=202)
    def upload(body: UploadRequest):
        ds = ingest_csv(
            body.csv,
            name=body.name,
            delimiter=body.delimiter,
            null_token=body.null_token,
        )
        engine = Engine(ds, k=body.k, seed=body.seed)
        entry = registry.add_dataset(engine, status="precomputing")
        threading.Thread(target=_precompute, args=(entry,), daemon=True).start()
        return _dataset_doc(entry)

    @app.get("/datasets")
    def list_datasets():
        return {
            "schema_version": API_SCHEMA_VERSION,
            "datasets": [
                {
                    "dataset_id": e.dataset_id,
                    "name": e.engine.dataset.name,
                    "status": e.status,
                    "progress": e.progress,
                }
                for e in registry.datasets.values()
            ],
        }

    @app.get("/datasets/{dataset_id}")
    def dataset_status(dataset_id: str):
        return _dataset_doc(registry.dataset(dataset_id))

    @app.post("/datasets/{dataset_id}/query")
    def query_insights(dataset_id: str, body: QueryRequest):
        engine = registry.ready_engine(dataset_id)
        q = body.to_query()
        results = rank_insights(engine, q)
        return {
            "schema_version": API_SCHEMA_VERSION,
            "class_id": resolve_class(q.class_id).class_id,
            "insights": [_descriptor_doc(d) for d in results],
        }

    @app.post("/datasets/{dataset_id}/visualization")
    def visualization(dataset_id: str, body: InsightRef):
        engine = registry.ready_engine(dataset_id)
        descriptor = describe_insight(engine, body.class_id, body.attributes)
        payload = build_payload(engine, descriptor)
        return {
            "schema_version": API_SCHEMA_VERSION,
            "descriptor": _descriptor_doc(descriptor),
            "viz_kind": payload.viz_kind,
            "attributes": list(payload.attributes),
            "series": _series_doc(payload),
        }

    @app.get("/datasets/{dataset_id}/overview/{class_id}")
    def class_overview(dataset_id: str, class_id: str, mode: str = AUTO):
        engine = registry.ready_engine(dataset_id)
        if mode not in MODES:
            raise QueryError(f"unknown mode {mode!r} (one of {', '.join(MODES)})")
        return _overview_doc(overview(engine, class_id, mode=mode))

    @app.post("/datasets/{dataset_id}/sessions", status_code=201)
    def create_session(dataset_id: str):
        engine = registry.ready_engine(dataset_id)
        entry = registry.add_session(dataset_id, sessions.new_state(engine))
        return _session_doc(entry)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_doc(registry.session(session_id))

    def _focus_target(engine: Engine, ref: InsightRef) -> InsightDescriptor:
        return describe_insight(engine, ref.class_id, ref.attributes)

    @app.post("/sessions/{session_id}/focus")
    def focus(session_id: str, body: InsightRef):
        entry = registry.session(session_id)
        engine = registry.ready_engine(entry.dataset_id)
        with entry.lock:
            entry.state = sessions.focus(engine, entry.state, _focus_target(engine, body))
        return _session_doc(entry)

    @app.post("/sessions/{session_id}/unfocus")
    def unfocus(session_id: str, body: InsightRef):
        entry = registry.session(session_id)
        engine = registry.ready_engine(entry.dataset_id)
        with entry.lock:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                entry.state = sessions.unfocus(
                    engine, entry.state, _focus_target(engine, body)
                )
        return _session_doc(entry, [str(w.message) for w in caught])

    @app.put("/sessions/{session_id}/constraint")
    def set_constraint(session_id: str, body: ConstraintRequest):
        entry = registry.session(session_id)
        engine = registry.ready_engine(entry.dataset_id)
        with entry.lock:
            entry.state = sessions.set_constraint(engine, entry.state, body.query.to_query())
        return _session_doc(entry)

    @app.delete("/sessions/{session_id}/constraint/{class_id}")
    def clear_constraint(session_id: str, class_id: str):
        entry = registry.session(session_id)
        engine = registry.ready_engine(entry.dataset_id)
        with entry.lock:
            entry.state = sessions.clear_constraint(engine, entry.state, class_id)
        return _session_doc(entry)

    @app.get("/sessions/{session_id}/save")
    def save_session(session_id: str):
        entry = registry.session(session_id)
        with entry.lock:
            document = sessions.save_state(entry.state)
        return Response(content=document, media_type="application/json")

    @app.post("/sessions/{session_id}/load")
    async def load_session(session_id: str, request: Request):
        entry = registry.session(session_id)
        engine = registry.ready_engine(entry.dataset_id)
        document = await request.body()
        with entry.lock:
            entry.state = sessions.load_state(document, engine)
        return _session_doc(entry)

    return app
