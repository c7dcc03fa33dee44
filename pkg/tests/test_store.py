"""Dataset store round-trips: manifest, summaries, persisted sketches."""

import json

import numpy as np
import pytest

from tabinsight.dataset import fingerprint, ingest_csv, moment_summary
from tabinsight.errors import SketchError, StateError
from tabinsight.query import InsightQuery, rank_insights
from tabinsight.store import init_store, open_store
from tabinsight.synth import generate, parse_plant


@pytest.fixture()
def csv_text():
    ds, _ = generate(300, 4, [parse_plant("rho:0.8:a,b")], seed=2, name="roundtrip")
    from tabinsight.dataset import to_csv

    return to_csv(ds)


def test_init_and_open_round_trip(tmp_path, csv_text):
    ds = ingest_csv(csv_text, name="roundtrip")
    store = init_store(tmp_path / "s", ds)
    assert (tmp_path / "s" / "manifest.json").exists()
    reopened = open_store(tmp_path / "s")
    assert reopened.dataset.column_names == ds.column_names
    assert fingerprint(reopened.dataset) == fingerprint(ds)
    # persisted summaries match a fresh pass exactly
    for col in ds.numeric_columns():
        assert reopened.summaries[col.name] == moment_summary(col)


def test_init_refuses_overwrite(tmp_path, csv_text):
    ds = ingest_csv(csv_text)
    init_store(tmp_path / "s", ds)
    with pytest.raises(StateError, match="already exists"):
        init_store(tmp_path / "s", ds)


def test_open_missing_store(tmp_path):
    with pytest.raises(StateError, match="no dataset store"):
        open_store(tmp_path / "nowhere")


def test_open_detects_tampered_data(tmp_path, csv_text):
    ds = ingest_csv(csv_text)
    init_store(tmp_path / "s", ds)
    data = tmp_path / "s" / "data.csv"
    lines = data.read_text().splitlines()
    lines[1] = lines[1].replace(lines[1].split(",")[0], "99.5", 1)
    data.write_text("\n".join(lines))
    with pytest.raises(StateError, match="fingerprint"):
        open_store(tmp_path / "s")


def test_open_rejects_unknown_manifest_version(tmp_path, csv_text):
    ds = ingest_csv(csv_text)
    init_store(tmp_path / "s", ds)
    mpath = tmp_path / "s" / "manifest.json"
    doc = json.loads(mpath.read_text())
    doc["schema_version"] = 99
    mpath.write_text(json.dumps(doc))
    with pytest.raises(StateError, match="schema"):
        open_store(tmp_path / "s")


def test_sketch_build_persist_reload(tmp_path, csv_text):
    ds = ingest_csv(csv_text, name="roundtrip")
    store = init_store(tmp_path / "s", ds)
    stats = store.build_sketches(k=128, seed=7)
    assert stats["columns"] == 4
    assert stats["sign_bits_per_column"] == 128
    assert stats["bytes_on_disk"] > 0
    assert stats["seconds"] >= 0

    reopened = open_store(tmp_path / "s")
    assert reopened.sketch_meta == {"k": 128, "seed": 7, "columns": 4}
    sketches = reopened.load_sketches()
    assert set(sketches) == {"a", "b", "x0", "x1"}
    # a fresh build from the same data is bit-identical
    fresh = store.build_sketches(k=128, seed=7)
    again = open_store(tmp_path / "s").load_sketches()
    for name in sketches:
        assert np.array_equal(sketches[name].dots, again[name].dots)


def test_engine_from_store_uses_persisted_sketches(tmp_path, csv_text):
    ds = ingest_csv(csv_text, name="roundtrip")
    store = init_store(tmp_path / "s", ds)
    store.build_sketches(k=256, seed=1)
    eng = open_store(tmp_path / "s").engine()
    assert eng.k == 256 and eng.seed == 1
    res = rank_insights(eng, InsightQuery("LinearRelationship", mode="sketch"))
    assert res[0].attributes == ("a", "b")
    assert res[0].approximate


def test_engine_without_sketches(tmp_path, csv_text):
    ds = ingest_csv(csv_text)
    store = init_store(tmp_path / "s", ds)
    eng = store.engine()
    assert rank_insights(eng, InsightQuery("Dispersion"))
    with pytest.raises(SketchError, match="no sketches"):
        store.engine(require_sketches=True)
    with pytest.raises(SketchError, match="no sketches"):
        store.load_sketches()


def test_missing_sketch_file_is_loud(tmp_path, csv_text):
    ds = ingest_csv(csv_text)
    store = init_store(tmp_path / "s", ds)
    store.build_sketches(k=64, seed=0)
    (tmp_path / "s" / "sketches" / "a.bin").unlink()
    with pytest.raises(SketchError, match="missing sketch file"):
        open_store(tmp_path / "s").load_sketches()
