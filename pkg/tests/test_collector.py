"""Collector: durable store, online session, HTTP endpoints."""

import json
import threading

import numpy as np
import pytest
import requests

from specsentry import fingerprint as fp
from specsentry.attacks import OpTally
from specsentry.collector import (
    OnlineSession,
    OutOfOrderError,
    VectorStore,
    load_models,
    make_server,
)
from specsentry.curation import VectorFrame
from specsentry.detectors import classify, save_model, score_matrix, train_detector

SENSOR = "rpi3-01"


def _benign_docs(n=40, seed=5, sensor_id=SENSOR):
    """Realistic benign vector documents with increasing timestamps."""
    prof = fp.build_device_profile(sensor_id, "rpi3-like", seed)
    docs = []
    for i in range(n):
        v = fp.synthesize_behavior_vector(
            prof, OpTally(), timestamp=float(i) * fp.CADENCE_S, seed=seed
        )
        docs.append(json.loads(v.to_json()))
    return docs


def _counts_matrix(docs):
    return np.array([[d["counts"][name] for name in fp.EVENT_NAMES] for d in docs], float)


def _make_model(docs):
    raw = _counts_matrix(docs)
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    X = (raw - lo) / span
    return train_detector("copod", X, tuple(fp.EVENT_NAMES), lo, hi, seed=0)


def _doc_with(counts_row, timestamp, sensor_id=SENSOR):
    return {
        "sensor_id": sensor_id,
        "timestamp": float(timestamp),
        "window_s": 50.0,
        "counts": {name: int(c) for name, c in zip(fp.EVENT_NAMES, counts_row)},
    }


@pytest.fixture(scope="module")
def fixture_docs():
    return _benign_docs()


@pytest.fixture(scope="module")
def fixture_model(fixture_docs):
    return _make_model(fixture_docs)


def _median_doc(model, docs, timestamp):
    """The training document whose score sits at the middle of the band:
    guaranteed inside the threshold band, so its verdict is benign."""
    raw = _counts_matrix(docs)
    X = np.array([model.normalize(r) for r in raw])
    order = np.argsort(score_matrix(model, X))
    mid = docs[order[len(order) // 2]]
    return _doc_with([mid["counts"][n] for n in fp.EVENT_NAMES], timestamp)


def _hot_doc(docs, timestamp):
    """Counts far outside anything seen in training."""
    raw = _counts_matrix(docs)
    return _doc_with(np.ceil(raw.max(axis=0) * 8 + 100), timestamp)


# ---------------------------------------------------------------------------
# store


def test_store_append_load_round_trip(tmp_path, fixture_docs):
    store = VectorStore(str(tmp_path))
    for doc in fixture_docs[:5]:
        store.append(doc)
    assert store.sensors() == [SENSOR]
    assert store.count() == 5
    assert store.load(SENSOR) == fixture_docs[:5]
    # a fresh handle on the same directory sees the same bytes
    again = VectorStore(str(tmp_path))
    assert again.load(SENSOR) == fixture_docs[:5]


def test_store_sanitizes_filenames(tmp_path):
    store = VectorStore(str(tmp_path))
    doc = {"sensor_id": "../../evil/dev", "timestamp": 0.0, "window_s": 50.0, "counts": {}}
    store.append(doc)
    names = [p.name for p in tmp_path.iterdir()]
    assert len(names) == 1
    assert "/" not in names[0] and names[0].endswith(".ndjson")
    assert store.load("../../evil/dev") == [doc]


def test_store_frames_rebuild_vectors(tmp_path, fixture_docs):
    store = VectorStore(str(tmp_path))
    for doc in fixture_docs[:8]:
        store.append(doc)
    frames = store.frames()
    assert set(frames) == {SENSOR}
    frame = frames[SENSOR]
    assert isinstance(frame, VectorFrame)
    assert frame.matrix.shape == (8, len(fp.EVENT_NAMES))
    assert np.array_equal(frame.matrix, _counts_matrix(fixture_docs[:8]))
    assert np.array_equal(frame.timestamps, [d["timestamp"] for d in fixture_docs[:8]])


def test_store_requires_a_root(monkeypatch):
    monkeypatch.delenv("SPECSENTRY_STORAGE", raising=False)
    with pytest.raises(ValueError, match="SPECSENTRY_STORAGE"):
        VectorStore(None)


def test_load_models_global_fallback(tmp_path, fixture_model):
    save_model(fixture_model, str(tmp_path / "global.model.json"))
    save_model(fixture_model, str(tmp_path / "rpi4-01.model.json"))
    (tmp_path / "notes.txt").write_text("ignore me")
    models = load_models(str(tmp_path))
    assert sorted(models) == ["global", "rpi4-01"]
    session = OnlineSession(VectorStore(str(tmp_path / "store")), models)
    assert session.model_for("rpi4-01") is models["rpi4-01"]
    assert session.model_for("never-seen") is models["global"]


# ---------------------------------------------------------------------------
# online session


def test_ingest_scores_and_reports_latency(tmp_path, fixture_docs, fixture_model):
    session = OnlineSession(VectorStore(str(tmp_path)), {"global": fixture_model})
    verdict = session.ingest(fixture_docs[0])
    assert verdict["status"] == "scored"
    assert verdict["detector"] == "copod"
    assert isinstance(verdict["anomalous"], bool)
    assert verdict["threshold_lo"] <= verdict["threshold_hi"]
    want = verdict["window_s"] + verdict["processing_s"] + verdict["scoring_s"]
    assert abs(verdict["detection_latency_s"] - want) < 1e-9
    assert verdict["detection_latency_s"] < 60.0
    assert session.store.count() == 1


def test_ingest_without_model_is_stored_unscored(tmp_path, fixture_docs):
    session = OnlineSession(VectorStore(str(tmp_path)), {})
    verdict = session.ingest(fixture_docs[0])
    assert verdict["status"] == "unscored"
    assert verdict["anomalous"] is None
    assert session.store.count() == 1


def test_ingest_rejects_backwards_time(tmp_path, fixture_docs):
    session = OnlineSession(VectorStore(str(tmp_path)), {})
    session.ingest(fixture_docs[1])
    with pytest.raises(OutOfOrderError):
        session.ingest(fixture_docs[1])  # same timestamp
    with pytest.raises(OutOfOrderError):
        session.ingest(fixture_docs[0])  # earlier timestamp
    assert session.store.count() == 1  # rejected vectors are not persisted


def test_ingest_rejects_bad_schema(tmp_path, fixture_docs):
    session = OnlineSession(VectorStore(str(tmp_path)), {})
    doc = json.loads(json.dumps(fixture_docs[0]))
    del doc["counts"][fp.EVENT_NAMES[0]]
    with pytest.raises(ValueError, match=fp.EVENT_NAMES[0]):
        session.ingest(doc)
    assert session.store.count() == 0


def test_alert_raises_after_consecutive_anomalies(tmp_path, fixture_docs, fixture_model):
    # sanity: the crafted documents really are anomalous through this model
    hot = _hot_doc(fixture_docs, 0.0)
    x = fixture_model.normalize([float(hot["counts"][n]) for n in fp.EVENT_NAMES])
    assert classify(fixture_model, x).anomalous

    session = OnlineSession(
        VectorStore(str(tmp_path)), {"global": fixture_model}, alert_after=2
    )
    v1 = session.ingest(_hot_doc(fixture_docs, 10.0))
    assert v1["anomalous"] and v1["consecutive_anomalies"] == 1 and not v1["alert"]
    v2 = session.ingest(_hot_doc(fixture_docs, 20.0))
    assert v2["consecutive_anomalies"] == 2 and v2["alert"]
    v3 = session.ingest(_median_doc(fixture_model, fixture_docs, 30.0))
    assert not v3["anomalous"]
    assert v3["consecutive_anomalies"] == 0 and not v3["alert"]

    out = session.verdicts(SENSOR)
    assert out["alert"] is False
    assert [v["alert"] for v in out["verdicts"]] == [False, True, False]
    assert session.verdicts("nobody") is None


def test_online_verdicts_match_offline_classification(tmp_path, fixture_docs, fixture_model):
    session = OnlineSession(VectorStore(str(tmp_path)), {"global": fixture_model})
    online = [session.ingest(doc)["anomalous"] for doc in fixture_docs]
    offline = []
    for doc in fixture_docs:
        x = fixture_model.normalize([float(doc["counts"][n]) for n in fp.EVENT_NAMES])
        offline.append(classify(fixture_model, x).anomalous)
    assert online == offline


# ---------------------------------------------------------------------------
# http front end


@pytest.fixture()
def http_collector(tmp_path, fixture_model):
    store = VectorStore(str(tmp_path))
    session = OnlineSession(store, {"global": fixture_model}, alert_after=2)
    server = make_server("127.0.0.1", 0, session)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, session
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def test_http_ingest_and_verdicts(http_collector, fixture_docs):
    base, session = http_collector
    r = requests.post(f"{base}/api/v1/vectors", json=fixture_docs[0], timeout=10)
    assert r.status_code == 200
    verdict = r.json()
    assert verdict["status"] == "scored"
    assert verdict["sensor_id"] == SENSOR

    # replaying the same timestamp conflicts
    r = requests.post(f"{base}/api/v1/vectors", json=fixture_docs[0], timeout=10)
    assert r.status_code == 409
    assert r.json()["error"] == "out_of_order"

    r = requests.get(f"{base}/api/v1/verdicts/{SENSOR}", timeout=10)
    assert r.status_code == 200
    body = r.json()
    assert len(body["verdicts"]) == 1
    assert body["verdicts"][0]["timestamp"] == fixture_docs[0]["timestamp"]

    assert session.store.count() == 1


def test_http_error_paths(http_collector, fixture_docs):
    base, _ = http_collector
    r = requests.post(
        f"{base}/api/v1/vectors",
        data=b"{not json",
        headers={"Content-Type": "application/json"},
        timeout=10,
    )
    assert r.status_code == 400 and r.json()["error"] == "bad_json"

    broken = json.loads(json.dumps(fixture_docs[0]))
    del broken["counts"][fp.EVENT_NAMES[3]]
    r = requests.post(f"{base}/api/v1/vectors", json=broken, timeout=10)
    assert r.status_code == 400
    assert r.json()["error"] == "invalid_vector"
    assert fp.EVENT_NAMES[3] in r.json()["detail"]

    assert requests.get(f"{base}/api/v1/verdicts/ghost", timeout=10).status_code == 404
    assert requests.post(f"{base}/api/v1/nope", json={}, timeout=10).status_code == 404


def test_http_health(http_collector, fixture_docs):
    base, _ = http_collector
    requests.post(f"{base}/api/v1/vectors", json=fixture_docs[0], timeout=10)
    r = requests.get(f"{base}/api/v1/health", timeout=10)
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["models"] == ["global"]
    assert body["sensors_seen"] == [SENSOR]
