#!/usr/bin/env python3
"""Sensor to collector to verdict, and back out of the store.

The collector persists every vector before acknowledging it, scores it
against the fleet model, and raises an alert after two anomalous windows
in a row. Because acknowledged vectors live on disk, the whole ingestion
can be replayed later into the exact curated dataset a retrain would use.
"""

import json
import tempfile
import threading
import urllib.request

import numpy as np

from specsentry.attacks import OpTally
from specsentry.collector import OnlineSession, VectorStore, make_server
from specsentry.curation import curate
from specsentry.detectors import train_detector
from specsentry.fingerprint import (
    CADENCE_S,
    EVENT_NAMES,
    build_device_profile,
    synthesize_behavior_vector,
)

profile = build_device_profile("rpi3-01", "rpi3-like", 0)
docs = []
for i in range(60):
    v = synthesize_behavior_vector(profile, OpTally(), timestamp=i * CADENCE_S, seed=0)
    docs.append(json.loads(v.to_json()))

# train a quick fleet model on the first 40 windows
X_raw = np.array([[d["counts"][n] for n in EVENT_NAMES] for d in docs[:40]], float)
lo, hi = X_raw.min(axis=0), X_raw.max(axis=0)
span = np.where(hi > lo, hi - lo, 1.0)
model = train_detector("copod", (X_raw - lo) / span, EVENT_NAMES, lo, hi, seed=0)

root = tempfile.mkdtemp(prefix="collector-demo-")
session = OnlineSession(VectorStore(root), {"global": model}, alert_after=2)
server = make_server("127.0.0.1", 0, session)
thread = threading.Thread(target=server.serve_forever, daemon=True)
thread.start()
base = f"http://127.0.0.1:{server.server_address[1]}"
print(f"collector listening on {base}, storage in {root}")


def post(doc):
    req = urllib.request.Request(
        base + "/api/v1/vectors",
        data=json.dumps(doc).encode(),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


for doc in docs[:40]:
    post(doc)
print("ingested 40 quiet windows, all acknowledged and scored")

# two benign windows, then two with inflated counts, then benign again
hot = dict(docs[42])
hot["counts"] = {n: c * 6 + 50 for n, c in docs[42]["counts"].items()}
hot2 = dict(docs[43])
hot2["counts"] = {n: c * 6 + 50 for n, c in docs[43]["counts"].items()}
stream = [docs[40], docs[41], hot, hot2, docs[44]]

print(f"\n{'timestamp':>10} {'score':>9} {'anomalous':>9} {'alert':>6}")
for doc in stream:
    v = post(doc)
    print(f"{doc['timestamp']:10.1f} {v['score']:9.3f} {str(v['anomalous']):>9} {str(v['alert']):>6}")
print("one hot window flags, the second in a row raises the alert,")
print("and a benign window resets the chain.")

for doc in docs[45:]:
    post(doc)

server.shutdown()
server.server_close()
thread.join()

# everything acknowledged is on disk; replay it into a curated dataset
frames = VectorStore(root).frames()
ds = curate(frames)
print(f"\nreplayed {sum(f.matrix.shape[0] for f in frames.values())} stored vectors "
      f"into a {ds.train.shape[0]}/{ds.val.shape[0]}/{ds.test.shape[0]} split "
      f"over {len(ds.feature_names)} kept features")
