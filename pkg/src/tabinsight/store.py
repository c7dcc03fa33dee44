"""The on-disk dataset store: one directory per ingested dataset.

Layout:

    store/
      manifest.json      name, fingerprint, shape, column kinds, sketch meta
      data.csv           canonical CSV (written by to_csv, exact round-trip)
      summaries.json     per-numeric-column moment summaries
      sketches/<col>.bin persisted hyperplane sketches (after `sketch`)

The store is append-only in spirit: ingest creates it, sketch adds to it,
queries only read. Opening a store re-ingests data.csv and cross-checks the
manifest, so silent corruption surfaces as a loud error instead of wrong
answers.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from .dataset import (
    Dataset,
    MomentSummary,
    fingerprint,
    ingest_csv,
    moment_summary,
    to_csv,
)
from .engine import Engine
from .errors import SketchError, StateError
from .sketch import HyperplaneConfig, build_hyperplane_many, sketch_from_bytes, sketch_to_bytes

MANIFEST_SCHEMA_VERSION = 1

MANIFEST = "manifest.json"
DATA = "data.csv"
SUMMARIES = "summaries.json"
SKETCH_DIR = "sketches"


def _summary_to_doc(s: MomentSummary) -> dict:
    return {
        "count": s.count,
        "sum1": s.sum1,
        "sum2": s.sum2,
        "sum3": s.sum3,
        "sum4": s.sum4,
        "minimum": s.minimum,
        "maximum": s.maximum,
    }


def _summary_from_doc(doc: dict) -> MomentSummary:
    return MomentSummary(
        count=int(doc["count"]),
        sum1=float(doc["sum1"]),
        sum2=float(doc["sum2"]),
        sum3=float(doc["sum3"]),
        sum4=float(doc["sum4"]),
        minimum=float(doc["minimum"]),
        maximum=float(doc["maximum"]),
    )


def init_store(path: str | Path, ds: Dataset) -> "Store":
    """Create a store directory for a dataset; fails if one already exists."""
    root = Path(path)
    if (root / MANIFEST).exists():
        raise StateError(f"store already exists at {root}")
    root.mkdir(parents=True, exist_ok=True)
    (root / DATA).write_text(to_csv(ds), encoding="utf-8")
    summaries = {c.name: moment_summary(c) for c in ds.numeric_columns()}
    (root / SUMMARIES).write_text(
        json.dumps(
            {name: _summary_to_doc(s) for name, s in summaries.items()},
            indent=2,
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "name": ds.name,
        "fingerprint": fingerprint(ds),
        "n_rows": ds.n_rows,
        "columns": [{"name": c.name, "kind": c.kind} for c in ds.columns],
        "sketch": None,
    }
    (root / MANIFEST).write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return Store(root, manifest, ds, summaries)


def open_store(path: str | Path) -> "Store":
    root = Path(path)
    manifest_path = root / MANIFEST
    if not manifest_path.exists():
        raise StateError(f"no dataset store at {root} (missing {MANIFEST})")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StateError(f"corrupt manifest in {root}: {exc}") from exc
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise StateError(
            f"store at {root} uses manifest schema "
            f"{manifest.get('schema_version')!r}; this build reads "
            f"{MANIFEST_SCHEMA_VERSION}"
        )
    ds = ingest_csv(
        (root / DATA).read_text(encoding="utf-8"), name=manifest["name"]
    )
    if fingerprint(ds) != manifest["fingerprint"]:
        raise StateError(
            f"data.csv in {root} does not match its manifest fingerprint"
        )
    try:
        raw = json.loads((root / SUMMARIES).read_text(encoding="utf-8"))
        summaries = {name: _summary_from_doc(doc) for name, doc in raw.items()}
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise StateError(f"corrupt summaries in {root}: {exc!r}") from exc
    return Store(root, manifest, ds, summaries)


class Store:
    """Handle to one store directory; see the module docstring for layout."""

    def __init__(self, root: Path, manifest: dict, ds: Dataset, summaries: dict):
        self.root = Path(root)
        self.manifest = manifest
        self.dataset = ds
        self.summaries = summaries

    @property
    def sketch_meta(self) -> dict | None:
        return self.manifest.get("sketch")

    def build_sketches(self, k: int, seed: int = 0) -> dict:
        """Build, persist, and describe hyperplane sketches for all numeric
        columns. Returns build stats: seconds, columns, bits, bytes on disk."""
        cfg = HyperplaneConfig(k=k, seed=seed)
        cols = self.dataset.numeric_columns()
        started = time.perf_counter()
        sketches = build_hyperplane_many(cols, cfg)
        elapsed = time.perf_counter() - started
        sketch_dir = self.root / SKETCH_DIR
        sketch_dir.mkdir(exist_ok=True)
        total_bytes = 0
        for s in sketches:
            blob = sketch_to_bytes(s)
            (sketch_dir / f"{s.column_id}.bin").write_bytes(blob)
            total_bytes += len(blob)
        self.manifest["sketch"] = {"k": k, "seed": seed, "columns": len(sketches)}
        (self.root / MANIFEST).write_text(
            json.dumps(self.manifest, indent=2, sort_keys=True), encoding="utf-8"
        )
        return {
            "seconds": elapsed,
            "columns": len(sketches),
            "sign_bits_per_column": k,
            "bytes_on_disk": total_bytes,
        }

    def load_sketches(self) -> dict:
        meta = self.sketch_meta
        if meta is None:
            raise SketchError(
                f"store at {self.root} has no sketches; run the sketch command first"
            )
        out = {}
        for col in self.dataset.numeric_columns():
            blob_path = self.root / SKETCH_DIR / f"{col.name}.bin"
            if not blob_path.exists():
                raise SketchError(f"missing sketch file for column {col.name!r}")
            out[col.name] = sketch_from_bytes(blob_path.read_bytes())
        return out

    def engine(self, *, require_sketches: bool = False) -> Engine:
        """An engine over this store's dataset, adopting persisted artifacts."""
        meta = self.sketch_meta
        if meta is not None:
            eng = Engine(
                self.dataset, k=meta["k"], seed=meta["seed"], summaries=self.summaries
            )
            eng.attach_sketches(self.load_sketches())
        elif require_sketches:
            raise SketchError(
                f"store at {self.root} has no sketches; run the sketch command first"
            )
        else:
            eng = Engine(self.dataset, summaries=self.summaries)
        return eng
