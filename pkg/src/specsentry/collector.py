"""Vector collector service.

A small threaded HTTP service that ingests behavior vectors, stores
them durably (NDJSON, fsync before the ack leaves the socket), scores
them against loaded detector models, and serves per-sensor verdicts.

Endpoints:

* ``POST /api/v1/vectors``             ingest one vector document
* ``GET  /api/v1/verdicts/<sensor_id>`` verdict history and alert state
* ``GET  /api/v1/health``              liveness and store summary

Vectors from sensors with no loadable model are stored anyway and
acknowledged as ``unscored``; an alert raises only after
``alert_after`` consecutive anomalous windows.  The storage root
defaults to the ``SPECSENTRY_STORAGE`` environment variable.
"""

import json
import os
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, List, Optional

from specsentry.curation import VectorFrame
from specsentry.detectors import DetectorModel, classify, load_model
from specsentry.fingerprint import BehaviorVector, validate_vector_doc

STORAGE_ENV = "SPECSENTRY_STORAGE"
DEFAULT_ALERT_AFTER = 2
VERDICT_HISTORY = 200


def _storage_root(root: Optional[str]) -> str:
    if root:
        return root
    env = os.environ.get(STORAGE_ENV)
    if env:
        return env
    raise ValueError(f"no storage root given and {STORAGE_ENV} is not set")


class VectorStore:
    """Append-only NDJSON store, one file per sensor.

    ``append`` does not return until the line is flushed and fsynced,
    so an acknowledged vector survives an immediate hard kill.
    """

    def __init__(self, root: Optional[str] = None):
        self.root = _storage_root(root)
        os.makedirs(self.root, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, sensor_id: str) -> str:
        safe = "".join(c if (c.isalnum() or c in "-_.") else "_" for c in sensor_id)
        return os.path.join(self.root, f"{safe}.ndjson")

    def append(self, doc: dict) -> None:
        line = json.dumps(doc, sort_keys=True)
        with self._lock:
            with open(self._path(doc["sensor_id"]), "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def sensors(self) -> List[str]:
        out = []
        for name in sorted(os.listdir(self.root)):
            if name.endswith(".ndjson"):
                out.append(name[: -len(".ndjson")])
        return out

    def load(self, sensor_id: str) -> List[dict]:
        path = self._path(sensor_id)
        if not os.path.exists(path):
            return []
        docs = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    docs.append(json.loads(line))
        return docs

    def count(self) -> int:
        return sum(len(self.load(s)) for s in self.sensors())

    def frames(self) -> Dict[str, VectorFrame]:
        """Stored vectors as per-sensor frames (the replay path)."""
        out: Dict[str, VectorFrame] = {}
        for stored_as in self.sensors():
            vectors = []
            for doc in self.load(stored_as):
                vectors.append(
                    BehaviorVector(
                        sensor_id=doc["sensor_id"],
                        timestamp=float(doc["timestamp"]),
                        window_s=float(doc["window_s"]),
                        counts={k: int(v) for k, v in doc["counts"].items()},
                    )
                )
            if vectors:
                out[vectors[0].sensor_id] = VectorFrame.from_vectors(vectors)
        return out


def load_models(models_dir: str) -> Dict[str, DetectorModel]:
    """Model files named ``<sensor_id>.model.json``; ``global.model.json``
    scores any sensor without its own model."""
    models: Dict[str, DetectorModel] = {}
    if not models_dir or not os.path.isdir(models_dir):
        return models
    for name in sorted(os.listdir(models_dir)):
        if name.endswith(".model.json"):
            models[name[: -len(".model.json")]] = load_model(os.path.join(models_dir, name))
    return models


@dataclass
class _SensorState:
    last_timestamp: float = float("-inf")
    consecutive_anomalies: int = 0
    alert: bool = False
    verdicts: List[dict] = field(default_factory=list)


class OnlineSession:
    """Ingest, score, and track alert state for a sensor fleet."""

    def __init__(
        self,
        store: VectorStore,
        models: Optional[Dict[str, DetectorModel]] = None,
        alert_after: int = DEFAULT_ALERT_AFTER,
    ):
        self.store = store
        self.models = dict(models or {})
        self.alert_after = int(alert_after)
        self._states: Dict[str, _SensorState] = {}
        self._lock = threading.Lock()

    def model_for(self, sensor_id: str) -> Optional[DetectorModel]:
        return self.models.get(sensor_id) or self.models.get("global")

    def ingest(self, doc: dict) -> dict:
        """Validate, persist, score.  Raises ValueError on bad schema and
        OutOfOrderError when a sensor's timestamps go backwards."""
        t_in = time.perf_counter()
        validate_vector_doc(doc)
        sensor_id = doc["sensor_id"]
        ts = float(doc["timestamp"])
        with self._lock:
            state = self._states.setdefault(sensor_id, _SensorState())
            if ts <= state.last_timestamp:
                raise OutOfOrderError(
                    f"timestamp {ts} not after last accepted {state.last_timestamp} for {sensor_id!r}"
                )
            state.last_timestamp = ts

        stored = dict(doc)
        stored["received_at"] = time.time()
        self.store.append(stored)
        processing_s = time.perf_counter() - t_in

        model = self.model_for(sensor_id)
        verdict: dict = {
            "sensor_id": sensor_id,
            "timestamp": ts,
            "window_s": float(doc["window_s"]),
        }
        scoring_s = 0.0
        if model is None:
            verdict["status"] = "unscored"
            verdict["anomalous"] = None
        else:
            t0 = time.perf_counter()
            raw = [float(doc["counts"][name]) for name in model.feature_names]
            x = model.normalize(raw)
            v = classify(model, x)
            scoring_s = time.perf_counter() - t0
            verdict.update(
                status="scored",
                anomalous=bool(v.anomalous),
                score=float(v.score),
                threshold_lo=float(v.lo),
                threshold_hi=float(v.hi),
                side=v.side,
                detector=model.kind,
            )
        verdict["processing_s"] = processing_s
        verdict["scoring_s"] = scoring_s
        verdict["detection_latency_s"] = float(doc["window_s"]) + processing_s + scoring_s

        with self._lock:
            state = self._states[sensor_id]
            if verdict.get("anomalous"):
                state.consecutive_anomalies += 1
            else:
                state.consecutive_anomalies = 0
            state.alert = state.consecutive_anomalies >= self.alert_after
            verdict["consecutive_anomalies"] = state.consecutive_anomalies
            verdict["alert"] = state.alert
            state.verdicts.append(verdict)
            del state.verdicts[:-VERDICT_HISTORY]
        return verdict

    def verdicts(self, sensor_id: str) -> Optional[dict]:
        with self._lock:
            state = self._states.get(sensor_id)
            if state is None:
                return None
            return {
                "sensor_id": sensor_id,
                "alert": state.alert,
                "consecutive_anomalies": state.consecutive_anomalies,
                "verdicts": list(state.verdicts),
            }

    def health(self) -> dict:
        with self._lock:
            sensors = sorted(self._states)
        return {
            "status": "ok",
            "storage_root": self.store.root,
            "models": sorted(self.models),
            "alert_after": self.alert_after,
            "sensors_seen": sensors,
        }


class OutOfOrderError(ValueError):
    pass


class CollectorHandler(BaseHTTPRequestHandler):
    server_version = "specsentry-collector/0.1"
    protocol_version = "HTTP/1.1"

    # quiet by default; the serve loop decides where logs go
    def log_message(self, fmt, *args):
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    def _send(self, code: int, doc: dict) -> None:
        body = json.dumps(doc, sort_keys=True).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        if self.path.rstrip("/") != "/api/v1/vectors":
            self._send(404, {"error": "not_found", "detail": self.path})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            doc = json.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            self._send(400, {"error": "bad_json", "detail": str(exc)})
            return
        session: OnlineSession = self.server.session
        try:
            verdict = session.ingest(doc)
        except OutOfOrderError as exc:
            self._send(409, {"error": "out_of_order", "detail": str(exc)})
            return
        except ValueError as exc:
            self._send(400, {"error": "invalid_vector", "detail": str(exc)})
            return
        self._send(200, verdict)

    def do_GET(self):
        session: OnlineSession = self.server.session
        path = self.path.rstrip("/")
        if path == "/api/v1/health":
            self._send(200, session.health())
            return
        prefix = "/api/v1/verdicts/"
        if self.path.startswith(prefix):
            sensor_id = self.path[len(prefix):].strip("/")
            out = session.verdicts(sensor_id)
            if out is None:
                self._send(404, {"error": "unknown_sensor", "detail": sensor_id})
                return
            self._send(200, out)
            return
        self._send(404, {"error": "not_found", "detail": self.path})


def make_server(
    host: str,
    port: int,
    session: OnlineSession,
    verbose: bool = False,
) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), CollectorHandler)
    server.session = session
    server.verbose = verbose
    return server


def serve(
    host: str = "127.0.0.1",
    port: int = 8732,
    storage_root: Optional[str] = None,
    models_dir: Optional[str] = None,
    alert_after: int = DEFAULT_ALERT_AFTER,
    verbose: bool = True,
) -> ThreadingHTTPServer:
    """Build and return a ready server (caller runs serve_forever)."""
    store = VectorStore(storage_root)
    session = OnlineSession(store, load_models(models_dir or ""), alert_after=alert_after)
    return make_server(host, port, session, verbose=verbose)
