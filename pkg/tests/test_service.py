"""HTTP surface checks: routes, error codes, and CLI/service agreement."""

import json
import time

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from tabinsight.cli import main
from tabinsight.service import create_app

CSV = "a,b,noise,label\n" + "".join(
    f"{i},{2 * i + 1},{(i * 7919) % 13},{'xyz'[i % 3]}\n" for i in range(60)
)


def wait_ready(client, dataset_id, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        doc = client.get(f"/datasets/{dataset_id}").json()
        if doc["status"] in ("ready", "failed"):
            return doc
        time.sleep(0.01)
    raise AssertionError("precompute never finished")


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture(scope="module")
def dataset_id(client):
    res = client.post("/datasets", json={"name": "toy", "csv": CSV, "k": 64, "seed": 1})
    assert res.status_code == 202
    doc = wait_ready(client, res.json()["dataset_id"])
    assert doc["status"] == "ready"
    return doc["dataset_id"]


def test_health_and_classes(client):
    health = client.get("/health").json()
    assert health == {"schema_version": 1, "status": "ok"}
    classes = client.get("/classes").json()["classes"]
    assert {c["class_id"] for c in classes} >= {"Dispersion", "LinearRelationship"}
    for c in classes:
        assert c["arity"] in (1, 2)


def test_upload_returns_manifest_and_progress_completes(client):
    res = client.post("/datasets", json={"name": "tiny", "csv": "x,y\n1,2\n3,4\n5,6\n"})
    assert res.status_code == 202
    body = res.json()
    assert [c["name"] for c in body["columns"]] == ["x", "y"]
    done = wait_ready(client, body["dataset_id"])
    assert done["status"] == "ready"
    assert done["progress"] == 1.0
    assert done["sketch"]["seed"] == 0


def test_upload_rejects_ragged_csv(client):
    res = client.post("/datasets", json={"name": "bad", "csv": "a,b\n1,2\n3\n"})
    assert res.status_code == 400
    assert res.json()["error"]["code"] == "BadRequest"


def test_query_orders_and_flags(client, dataset_id):
    res = client.post(
        f"/datasets/{dataset_id}/query",
        json={"class_id": "linear", "mode": "exact", "limit": 3},
    )
    assert res.status_code == 200
    insights = res.json()["insights"]
    assert insights[0]["attributes"] == ["a", "b"]
    assert insights[0]["approximate"] is False
    values = [d["value"] for d in insights]
    assert values == sorted(values, reverse=True)


def test_query_range_keeps_interval_only(client, dataset_id):
    res = client.post(
        f"/datasets/{dataset_id}/query",
        json={"class_id": "linear", "mode": "exact", "metric_range": [0.5, 0.8]},
    )
    assert res.status_code == 200
    for d in res.json()["insights"]:
        assert 0.5 <= d["value"] <= 0.8


def test_query_rejects_oversized_page(client, dataset_id):
    res = client.post(
        f"/datasets/{dataset_id}/query", json={"class_id": "linear", "limit": 51}
    )
    assert res.status_code == 400
    assert "page cap" in res.json()["error"]["message"]


def test_query_malformed_body_is_bad_request(client, dataset_id):
    res = client.post(
        f"/datasets/{dataset_id}/query", json={"class_id": "linear", "limit": "many"}
    )
    assert res.status_code == 400
    err = res.json()["error"]
    assert err["code"] == "BadRequest"
    assert err["detail"]


def test_unknown_ids_are_not_found(client):
    assert client.get("/datasets/nope").status_code == 404
    assert client.get("/sessions/nope").status_code == 404
    res = client.post("/datasets/nope/query", json={"class_id": "linear"})
    assert res.json()["error"]["code"] == "NotFound"


def test_not_ready_dataset_conflicts(client):
    registry = client.app.state.registry
    entry = registry.datasets[next(iter(registry.datasets))]
    import tabinsight.service as service_mod

    stuck = service_mod.DatasetEntry(
        dataset_id="dstuck", engine=entry.engine, status="precomputing"
    )
    registry.datasets["dstuck"] = stuck
    try:
        res = client.post("/datasets/dstuck/query", json={"class_id": "linear"})
        assert res.status_code == 409
        assert res.json()["error"]["code"] == "Conflict"
    finally:
        del registry.datasets["dstuck"]


def test_scatter_visualization_carries_fit_line(client, dataset_id):
    res = client.post(
        f"/datasets/{dataset_id}/visualization",
        json={"class_id": "linear", "attributes": ["a", "b"]},
    )
    assert res.status_code == 200
    body = res.json()
    assert body["viz_kind"] == "ScatterWithFitLine"
    assert body["series"]["slope"] == pytest.approx(2.0)
    assert body["series"]["intercept"] == pytest.approx(1.0)
    assert len(body["series"]["x"]) == len(body["series"]["y"])


def test_pareto_visualization_for_categorical(client, dataset_id):
    res = client.post(
        f"/datasets/{dataset_id}/visualization",
        json={"class_id": "frequencies", "attributes": ["label"]},
    )
    assert res.status_code == 200
    series = res.json()["series"]
    assert series["cumulative"][-1] == pytest.approx(1.0)


def test_visualization_unknown_attribute_is_bad_request(client, dataset_id):
    res = client.post(
        f"/datasets/{dataset_id}/visualization",
        json={"class_id": "linear", "attributes": ["a", "ghost"]},
    )
    assert res.status_code == 400


def test_overview_matrix_and_repeat_reads_identical(client, dataset_id):
    first = client.get(f"/datasets/{dataset_id}/overview/linear?mode=exact")
    second = client.get(f"/datasets/{dataset_id}/overview/linear?mode=exact")
    assert first.status_code == 200
    assert first.content == second.content
    doc = first.json()
    assert doc["kind"] == "matrix"
    n = len(doc["attributes"])
    assert all(len(row) == n for row in doc["matrix"])


def test_repeat_query_reads_identical(client, dataset_id):
    body = {"class_id": "dispersion", "limit": 5}
    one = client.post(f"/datasets/{dataset_id}/query", json=body)
    two = client.post(f"/datasets/{dataset_id}/query", json=body)
    assert one.content == two.content


def test_session_lifecycle(client, dataset_id):
    created = client.post(f"/datasets/{dataset_id}/sessions")
    assert created.status_code == 201
    sid = created.json()["session_id"]
    state = created.json()["state"]
    assert state["focus_list"] == []
    assert len(state["recommendations"]) == 7

    focused = client.post(
        f"/sessions/{sid}/focus", json={"class_id": "linear", "attributes": ["a", "b"]}
    )
    assert focused.status_code == 200
    assert len(focused.json()["state"]["focus_list"]) == 1

    again = client.post(
        f"/sessions/{sid}/focus", json={"class_id": "linear", "attributes": ["a", "b"]}
    )
    assert len(again.json()["state"]["focus_list"]) == 1

    missing = client.post(
        f"/sessions/{sid}/unfocus",
        json={"class_id": "linear", "attributes": ["a", "noise"]},
    )
    assert missing.status_code == 200
    assert missing.json()["warnings"]

    dropped = client.post(
        f"/sessions/{sid}/unfocus", json={"class_id": "linear", "attributes": ["a", "b"]}
    )
    assert dropped.json()["state"]["focus_list"] == []
    assert dropped.json()["warnings"] == []


def test_session_constraint_set_and_clear(client, dataset_id):
    sid = client.post(f"/datasets/{dataset_id}/sessions").json()["session_id"]
    res = client.put(
        f"/sessions/{sid}/constraint",
        json={"query": {"class_id": "linear", "limit": 2, "mode": "exact"}},
    )
    assert res.status_code == 200
    state = res.json()["state"]
    assert len(state["class_constraints"]) == 1
    linear = [
        r for r in state["recommendations"] if r["class_id"] == "LinearRelationship"
    ][0]
    assert len(linear["insights"]) <= 2

    cleared = client.delete(f"/sessions/{sid}/constraint/linear")
    assert cleared.json()["state"]["class_constraints"] == []


def test_session_save_load_round_trip(client, dataset_id):
    sid = client.post(f"/datasets/{dataset_id}/sessions").json()["session_id"]
    client.post(
        f"/sessions/{sid}/focus", json={"class_id": "dispersion", "attributes": ["a"]}
    )
    saved = client.get(f"/sessions/{sid}/save")
    assert saved.status_code == 200
    doc = json.loads(saved.content)
    assert doc["schema_version"] == 1

    loaded = client.post(f"/sessions/{sid}/load", content=saved.content)
    assert loaded.status_code == 200
    assert loaded.json()["state"] == client.get(f"/sessions/{sid}").json()["state"]


def test_session_load_wrong_dataset_conflicts(client, dataset_id):
    other = client.post(
        "/datasets", json={"name": "other", "csv": "p,q\n1,9\n2,8\n3,7\n4,6\n"}
    )
    other_id = other.json()["dataset_id"]
    wait_ready(client, other_id)
    sid_a = client.post(f"/datasets/{dataset_id}/sessions").json()["session_id"]
    sid_b = client.post(f"/datasets/{other_id}/sessions").json()["session_id"]
    saved = client.get(f"/sessions/{sid_a}/save")
    res = client.post(f"/sessions/{sid_b}/load", content=saved.content)
    assert res.status_code == 409
    assert res.json()["error"]["code"] == "Conflict"


def test_session_load_garbage_is_bad_request(client, dataset_id):
    sid = client.post(f"/datasets/{dataset_id}/sessions").json()["session_id"]
    res = client.post(f"/sessions/{sid}/load", content=b"not a document")
    assert res.status_code == 400


@pytest.fixture(scope="module")
def planted_store(tmp_path_factory):
    root = tmp_path_factory.mktemp("planted")
    runner = CliRunner()
    csv = root / "gen.csv"
    args = [
        "synth", "--rows", "600", "--cols", "8", "--seed", "9", "--out", str(csv),
        "--plant", "rho:0.9:a,b", "--plant", "rho:0.65:c,d", "--plant", "skew:2:s",
    ]
    assert runner.invoke(main, args).exit_code == 0
    store = root / "store"
    assert runner.invoke(main, ["ingest", str(csv), "--out", str(store)]).exit_code == 0
    assert runner.invoke(main, ["sketch", str(store), "--k", "512", "--seed", "4"]).exit_code == 0
    return store


@pytest.mark.parametrize("mode", ["exact", "sketch"])
def test_cli_query_equals_service_query(planted_store, tmp_path, mode):
    """One engine, two fronts: the JSONL rows must match the HTTP insights."""
    out = tmp_path / f"{mode}.jsonl"
    res = CliRunner().invoke(
        main,
        ["query", str(planted_store), "--class", "linear", "--mode", mode,
         "--top", "5", "--json", str(out)],
    )
    assert res.exit_code == 0, res.output
    cli_rows = [json.loads(line) for line in out.read_text().splitlines()]

    with TestClient(create_app(planted_store)) as client:
        listed = client.get("/datasets").json()["datasets"]
        assert listed[0]["status"] == "ready"
        res = client.post(
            f"/datasets/{listed[0]['dataset_id']}/query",
            json={"class_id": "linear", "mode": mode, "limit": 5},
        )
        assert res.status_code == 200
        assert res.json()["insights"] == cli_rows


def test_preloaded_store_exposes_sketch_meta(planted_store):
    with TestClient(create_app(planted_store)) as client:
        listed = client.get("/datasets").json()["datasets"]
        doc = client.get(f"/datasets/{listed[0]['dataset_id']}").json()
        assert doc["sketch"]["k"] == 512
        assert doc["sketch"]["seed"] == 4
        assert doc["status"] == "ready"
