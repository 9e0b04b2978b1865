"""Dataset curation: row scrubbing, feature dropping, split, scaling.

The pipeline mirrors how fleet telemetry gets distilled before model
training: drop corrupted rows (robust z-score outliers across many
features at once), drop columns that carry nothing (constant or almost
constant), drop columns that duplicate an earlier one (|Pearson r| >
0.95), drop columns whose distribution shifts over time or between
devices (two-sample KS D > 0.3), then split each device's stream
chronologically 72/18/10 and min-max scale with train-fitted bounds.

Scaled values are deliberately NOT clamped: a value outside [0, 1] is
exactly the signal the detectors are looking for.
"""

import csv
import io
import json
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from specsentry.fingerprint import EVENT_NAMES, BehaviorVector

NOISY_Z = 6.0
NOISY_FRACTION = 0.25
NOISY_MIN_ROWS = 10
LOWINFO_VARIANCE = 1e-6
LOWINFO_IDENTICAL = 0.99
CORR_LIMIT = 0.95
KS_LIMIT = 0.3
SPLIT_RATIOS = (0.72, 0.18, 0.10)


@dataclass
class VectorFrame:
    """A device's vector stream as a dense matrix."""

    sensor_id: str
    timestamps: np.ndarray            # (n,), seconds, ascending
    matrix: np.ndarray                # (n, n_features)
    feature_names: Tuple[str, ...]
    window_s: float = 50.0

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.shape[0] != self.timestamps.shape[0]:
            raise ValueError("matrix rows and timestamps disagree")
        if self.matrix.shape[1] != len(self.feature_names):
            raise ValueError("matrix columns and feature names disagree")

    @staticmethod
    def from_vectors(vectors: Sequence[BehaviorVector]) -> "VectorFrame":
        if not vectors:
            raise ValueError("no vectors")
        sensor = vectors[0].sensor_id
        order = sorted(range(len(vectors)), key=lambda i: vectors[i].timestamp)
        ts = np.array([vectors[i].timestamp for i in order])
        mat = np.stack([vectors[i].as_array() for i in order])
        return VectorFrame(
            sensor_id=sensor,
            timestamps=ts,
            matrix=mat,
            feature_names=tuple(EVENT_NAMES),
            window_s=vectors[0].window_s,
        )

    def select(self, names: Sequence[str]) -> "VectorFrame":
        idx = [self.feature_names.index(n) for n in names]
        return VectorFrame(
            sensor_id=self.sensor_id,
            timestamps=self.timestamps.copy(),
            matrix=self.matrix[:, idx].copy(),
            feature_names=tuple(names),
            window_s=self.window_s,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sensor_id", "timestamp", "window_s", *self.feature_names])
            for t, row in zip(self.timestamps, self.matrix):
                w.writerow([self.sensor_id, "%.17g" % t, "%.17g" % self.window_s]
                           + ["%.17g" % v for v in row])

    @staticmethod
    def from_csv(path) -> "VectorFrame":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if not header or header[:3] != ["sensor_id", "timestamp", "window_s"]:
                raise ValueError(f"{path}: not a vector frame CSV")
            names = tuple(header[3:])
            sensor = None
            ts, rows, window = [], [], 50.0
            for line in r:
                sensor = line[0]
                ts.append(float(line[1]))
                window = float(line[2])
                rows.append([float(v) for v in line[3:]])
        if sensor is None:
            raise ValueError(f"{path}: empty vector frame")
        return VectorFrame(sensor, np.array(ts), np.array(rows), names, window)


# ---------------------------------------------------------------------------
# row scrubbing


def remove_noisy_vectors(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Keep-mask over rows plus the per-row offending-feature fraction.

    A row goes when more than NOISY_FRACTION of features sit further than
    NOISY_Z median-absolute-deviations from the column median.  Columns
    with MAD 0 never accuse a row.  Below NOISY_MIN_ROWS rows the data is
    too thin to judge and everything is kept.
    """
    X = np.asarray(matrix, dtype=np.float64)
    n = X.shape[0]
    if n < NOISY_MIN_ROWS:
        return np.ones(n, dtype=bool), np.zeros(n)
    med = np.median(X, axis=0)
    mad = np.median(np.abs(X - med), axis=0)
    usable = mad > 0
    if not usable.any():
        return np.ones(n, dtype=bool), np.zeros(n)
    z = np.zeros_like(X)
    z[:, usable] = np.abs(X[:, usable] - med[usable]) / mad[usable]
    frac = (z > NOISY_Z).sum(axis=1) / X.shape[1]
    return frac < NOISY_FRACTION, frac


# ---------------------------------------------------------------------------
# column drops


def drop_constant_and_lowinfo(matrix: np.ndarray, names: Sequence[str]) -> Tuple[List[str], List[dict]]:
    """Names to drop: single-valued, tiny scaled variance, or >99% identical."""
    X = np.asarray(matrix, dtype=np.float64)
    dropped, log = [], []
    for j, name in enumerate(names):
        col = X[:, j]
        lo, hi = col.min(), col.max()
        if lo == hi:
            dropped.append(name)
            log.append({"stage": "constant", "feature": name, "value": float(lo)})
            continue
        scaled = (col - lo) / (hi - lo)
        var = float(scaled.var())
        if var < LOWINFO_VARIANCE:
            dropped.append(name)
            log.append({"stage": "low_info", "feature": name, "scaled_variance": var})
            continue
        _, counts = np.unique(col, return_counts=True)
        top = counts.max() / col.size
        if top > LOWINFO_IDENTICAL:
            dropped.append(name)
            log.append({"stage": "low_info", "feature": name, "identical_fraction": float(top)})
    return dropped, log


def drop_correlated(matrix: np.ndarray, names: Sequence[str]) -> Tuple[List[str], List[dict]]:
    """Names to drop for |Pearson r| > CORR_LIMIT; later column loses."""
    X = np.asarray(matrix, dtype=np.float64)
    p = len(names)
    if p < 2 or X.shape[0] < 3:
        return [], []
    with np.errstate(invalid="ignore"):
        corr = np.corrcoef(X, rowvar=False)
    corr = np.nan_to_num(corr, nan=0.0)
    alive = np.ones(p, dtype=bool)
    dropped, log = [], []
    for i in range(p):
        if not alive[i]:
            continue
        for j in range(i + 1, p):
            if alive[j] and abs(corr[i, j]) > CORR_LIMIT:
                alive[j] = False
                dropped.append(names[j])
                log.append({
                    "stage": "correlated",
                    "feature": names[j],
                    "kept": names[i],
                    "r": float(corr[i, j]),
                })
    return dropped, log


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov D."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        return 0.0
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def drop_drifting(
    per_device: Dict[str, np.ndarray], names: Sequence[str]
) -> Tuple[List[str], List[dict]]:
    """Names whose distribution shifts over time or between devices.

    ``per_device`` maps sensor_id to that device's (rows, features)
    matrix in chronological row order.  A feature is dropped when the KS
    statistic between a device's first and second time halves, or
    between any device pair, exceeds KS_LIMIT.  Requires at least two
    devices or enough rows for two halves.
    """
    devices = list(per_device)
    if not devices:
        raise ValueError("no devices")
    some_rows = max(m.shape[0] for m in per_device.values())
    if len(devices) < 2 and some_rows < 4:
        raise ValueError("drift check needs >= 2 devices or >= 2 time halves")
    dropped, log = [], []
    for j, name in enumerate(names):
        verdict = None
        for dev in devices:
            col = per_device[dev][:, j]
            half = col.size // 2
            if half >= 2:
                d = ks_statistic(col[:half], col[half:])
                if d > KS_LIMIT:
                    verdict = {"stage": "drifting", "feature": name, "scope": f"time:{dev}", "ks": d}
                    break
        if verdict is None:
            for ai in range(len(devices)):
                for bi in range(ai + 1, len(devices)):
                    d = ks_statistic(per_device[devices[ai]][:, j], per_device[devices[bi]][:, j])
                    if d > KS_LIMIT:
                        verdict = {
                            "stage": "drifting",
                            "feature": name,
                            "scope": f"devices:{devices[ai]}|{devices[bi]}",
                            "ks": d,
                        }
                        break
                if verdict is not None:
                    break
        if verdict is not None:
            dropped.append(name)
            log.append(verdict)
    return dropped, log


# ---------------------------------------------------------------------------
# selection + dataset assembly


@dataclass
class FeatureSelection:
    kept: Tuple[str, ...]
    log: List[dict] = field(default_factory=list)
    rows_dropped: Dict[str, int] = field(default_factory=dict)


def fit_feature_selection(frames: Dict[str, VectorFrame]) -> FeatureSelection:
    """Run the full drop pipeline over a fleet of benign frames."""
    if not frames:
        raise ValueError("no frames")
    names = None
    for f in frames.values():
        if names is None:
            names = f.feature_names
        elif f.feature_names != names:
            raise ValueError("frames disagree on feature names")
    log: List[dict] = []
    rows_dropped: Dict[str, int] = {}
    clean: Dict[str, np.ndarray] = {}
    for dev, f in frames.items():
        keep, _ = remove_noisy_vectors(f.matrix)
        rows_dropped[dev] = int((~keep).sum())
        clean[dev] = f.matrix[keep]
        if rows_dropped[dev]:
            log.append({"stage": "remove_noisy", "sensor": dev, "rows_dropped": rows_dropped[dev]})

    pooled = np.vstack(list(clean.values()))
    current = list(names)

    drops, l1 = drop_constant_and_lowinfo(pooled, current)
    log.extend(l1)
    current = [n for n in current if n not in set(drops)]
    idx = [names.index(n) for n in current]
    pooled = np.vstack([clean[d][:, idx] for d in clean])
    per_dev = {d: clean[d][:, idx] for d in clean}

    drops, l2 = drop_correlated(pooled, current)
    log.extend(l2)
    keep2 = [k for k, n in enumerate(current) if n not in set(drops)]
    current = [current[k] for k in keep2]
    per_dev = {d: m[:, keep2] for d, m in per_dev.items()}

    drops, l3 = drop_drifting(per_dev, current)
    log.extend(l3)
    current = [n for n in current if n not in set(drops)]

    return FeatureSelection(kept=tuple(current), log=log, rows_dropped=rows_dropped)


def chronological_split(n: int, ratios: Tuple[float, float, float] = SPLIT_RATIOS) -> Tuple[slice, slice, slice]:
    """Index slices for a 72/18/10 (by default) ordered split."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    n_train = int(np.floor(n * ratios[0]))
    n_val = int(np.floor(n * ratios[1]))
    return slice(0, n_train), slice(n_train, n_train + n_val), slice(n_train + n_val, n)


@dataclass
class CuratedDataset:
    """Normalized train/val/test partitions plus everything needed to
    map new vectors into the same space."""

    feature_names: Tuple[str, ...]
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    norm_min: np.ndarray
    norm_max: np.ndarray
    train_sensors: np.ndarray
    val_sensors: np.ndarray
    test_sensors: np.ndarray
    train_ts: np.ndarray
    val_ts: np.ndarray
    test_ts: np.ndarray
    curation_log: List[dict] = field(default_factory=list)
    ratios: Tuple[float, float, float] = SPLIT_RATIOS

    def normalize(self, X: np.ndarray) -> np.ndarray:
        """Train-fitted min-max scaling; out-of-range values pass through
        unclamped (being out of range IS the signal)."""
        span = self.norm_max - self.norm_min
        span = np.where(span > 0, span, 1.0)
        return (np.asarray(X, dtype=np.float64) - self.norm_min) / span

    def save(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        for part in ("train", "val", "test"):
            X = getattr(self, part)
            with open(os.path.join(out_dir, f"{part}.csv"), "w", encoding="utf-8") as fh:
                fh.write(",".join(self.feature_names) + "\n")
                for row in X:
                    fh.write(",".join("%.17g" % v for v in row) + "\n")
        meta = {
            "feature_names": list(self.feature_names),
            "norm_min": self.norm_min.tolist(),
            "norm_max": self.norm_max.tolist(),
            "ratios": list(self.ratios),
            "curation_log": self.curation_log,
            "partitions": {
                part: {
                    "sensors": list(getattr(self, f"{part}_sensors")),
                    "timestamps": getattr(self, f"{part}_ts").tolist(),
                }
                for part in ("train", "val", "test")
            },
            "normalized": True,
        }
        with open(os.path.join(out_dir, "dataset.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)

    @staticmethod
    def load(out_dir) -> "CuratedDataset":
        with open(os.path.join(out_dir, "dataset.json"), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        parts = {}
        for part in ("train", "val", "test"):
            with open(os.path.join(out_dir, f"{part}.csv"), "r", encoding="utf-8") as fh:
                header = fh.readline().strip().split(",")
                if header != meta["feature_names"]:
                    raise ValueError(f"{part}.csv header disagrees with dataset.json")
                rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
            parts[part] = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
        return CuratedDataset(
            feature_names=tuple(meta["feature_names"]),
            train=parts["train"],
            val=parts["val"],
            test=parts["test"],
            norm_min=np.array(meta["norm_min"]),
            norm_max=np.array(meta["norm_max"]),
            train_sensors=np.array(meta["partitions"]["train"]["sensors"]),
            val_sensors=np.array(meta["partitions"]["val"]["sensors"]),
            test_sensors=np.array(meta["partitions"]["test"]["sensors"]),
            train_ts=np.array(meta["partitions"]["train"]["timestamps"]),
            val_ts=np.array(meta["partitions"]["val"]["timestamps"]),
            test_ts=np.array(meta["partitions"]["test"]["timestamps"]),
            curation_log=meta["curation_log"],
            ratios=tuple(meta["ratios"]),
        )


def curate(
    frames: Dict[str, VectorFrame],
    selection: Optional[FeatureSelection] = None,
    ratios: Tuple[float, float, float] = SPLIT_RATIOS,
) -> CuratedDataset:
    """Assemble a curated dataset from benign frames.

    Feature selection defaults to being fitted on the given frames; pass
    a prefitted selection to reuse a fleet-wide feature set.  Rows are
    scrubbed per device, split chronologically per device, pooled, and
    min-max scaled with parameters fitted on the pooled train partition
    only (no leakage from val/test).
    """
    if selection is None:
        selection = fit_feature_selection(frames)
    kept = list(selection.kept)

    parts = {p: [] for p in ("train", "val", "test")}
    sensors = {p: [] for p in ("train", "val", "test")}
    stamps = {p: [] for p in ("train", "val", "test")}
    for dev in sorted(frames):
        f = frames[dev]
        keep, _ = remove_noisy_vectors(f.matrix)
        idx = [f.feature_names.index(n) for n in kept]
        X = f.matrix[keep][:, idx]
        ts = f.timestamps[keep]
        tr, va, te = chronological_split(X.shape[0], ratios)
        for part, sl in (("train", tr), ("val", va), ("test", te)):
            parts[part].append(X[sl])
            stamps[part].append(ts[sl])
            sensors[part].extend([dev] * (sl.stop - sl.start))

    train = np.vstack(parts["train"]) if parts["train"] else np.empty((0, len(kept)))
    val = np.vstack(parts["val"]) if parts["val"] else np.empty((0, len(kept)))
    test = np.vstack(parts["test"]) if parts["test"] else np.empty((0, len(kept)))
    if train.shape[0] == 0:
        raise ValueError("empty train partition")
    norm_min = train.min(axis=0)
    norm_max = train.max(axis=0)

    ds = CuratedDataset(
        feature_names=tuple(kept),
        train=np.empty(0),
        val=np.empty(0),
        test=np.empty(0),
        norm_min=norm_min,
        norm_max=norm_max,
        train_sensors=np.array(sensors["train"]),
        val_sensors=np.array(sensors["val"]),
        test_sensors=np.array(sensors["test"]),
        train_ts=np.concatenate(stamps["train"]) if stamps["train"] else np.empty(0),
        val_ts=np.concatenate(stamps["val"]) if stamps["val"] else np.empty(0),
        test_ts=np.concatenate(stamps["test"]) if stamps["test"] else np.empty(0),
        curation_log=list(selection.log),
        ratios=ratios,
    )
    ds.train = ds.normalize(train)
    ds.val = ds.normalize(val)
    ds.test = ds.normalize(test)
    return ds
