"""Model persistence: JSON container with base64-packed arrays.

Arrays are stored bit exactly ({dtype, shape, raw bytes}), so a loaded
model carries the exact parameters and thresholds that were saved.
"""

import base64
import json
import os
from typing import Any

import numpy as np

from specsentry.detectors.base import DetectorModel

FORMAT_NAME = "specsentry-model"
FORMAT_VERSION = 1


def _pack(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        arr = np.ascontiguousarray(value)
        return {
            "__ndarray__": {
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "data": base64.b64encode(arr.tobytes()).decode("ascii"),
            }
        }
    if isinstance(value, dict):
        return {k: _pack(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_pack(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def _unpack(value: Any) -> Any:
    if isinstance(value, dict):
        if set(value.keys()) == {"__ndarray__"}:
            spec = value["__ndarray__"]
            raw = base64.b64decode(spec["data"])
            arr = np.frombuffer(raw, dtype=np.dtype(spec["dtype"]))
            return arr.reshape(tuple(spec["shape"])).copy()
        return {k: _unpack(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_unpack(v) for v in value]
    return value


def model_to_doc(model: DetectorModel) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "feature_names": list(model.feature_names),
        "params": _pack(model.params),
        "thresholds": {"lo": model.threshold_lo, "hi": model.threshold_hi},
        "normalization": {
            "min": _pack(model.norm_min),
            "max": _pack(model.norm_max),
        },
        "training": {
            "seed": model.train_seed,
            "rows": model.train_rows,
            "seconds": model.train_seconds,
        },
        "extras": {k: float(v) for k, v in model.extras.items()},
    }


def model_from_doc(doc: dict) -> DetectorModel:
    if doc.get("format") != FORMAT_NAME:
        raise ValueError("not a detector model document")
    if int(doc.get("version", -1)) != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    return DetectorModel(
        kind=doc["kind"],
        feature_names=tuple(doc["feature_names"]),
        params=_unpack(doc["params"]),
        threshold_lo=float(doc["thresholds"]["lo"]),
        threshold_hi=float(doc["thresholds"]["hi"]),
        norm_min=_unpack(doc["normalization"]["min"]),
        norm_max=_unpack(doc["normalization"]["max"]),
        train_seed=int(doc["training"]["seed"]),
        train_rows=int(doc["training"]["rows"]),
        train_seconds=float(doc["training"].get("seconds", 0.0)),
        extras={k: float(v) for k, v in doc.get("extras", {}).items()},
    )


def save_model(model: DetectorModel, path: str) -> None:
    doc = model_to_doc(model)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
    os.replace(tmp, path)


def load_model(path: str) -> DetectorModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_doc(doc)
