"""Experiment harnesses and metrics.

Three harnesses share one synthesized fleet:

* ``individual``   - one model per device per detector; tested on the
                     device's own held-out benign tail and attack rows.
* ``device_type``  - exclusion sweep inside one device type: train on a
                     subset, measure the false-alarm behavior on the
                     devices that were left out, for every subset size.
* ``global``       - one model per detector over the balanced fleet pool.

Feature selection is fitted once on the full fleet's benign streams and
reused everywhere, so every harness works in the same feature space.
"""

import itertools
import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from specsentry.attacks import ATTACK_KINDS
from specsentry.curation import (
    SPLIT_RATIOS,
    VectorFrame,
    chronological_split,
    curate,
    fit_feature_selection,
    remove_noisy_vectors,
)
from specsentry.datasets import (
    DEFAULT_DELAY_S,
    DEFAULT_NOISE_DB,
    FLEET_LAYOUT,
    GRID_BANDWIDTHS_HZ,
    attack_plan_grid,
    build_fleet,
    fleet_attack_frames,
    fleet_benign_frames,
    rows_for_hours,
)
from specsentry.detectors import DETECTOR_KINDS, classify_matrix, train_detector
from specsentry.fingerprint import CADENCE_S

EXPERIMENT_KINDS = ("individual", "device_type", "global")

# subset sizes of the six-device type mapped to the reported share of
# the type's fleet that the trained model has never seen
EXCLUDED_FRACTION_LABELS = {1: 0.15, 2: 0.33, 3: 0.50, 4: 0.66, 5: 0.85}


def bandwidth_label(hz: float) -> str:
    if hz >= 1e6:
        v = hz / 1e6
        return f"{v:g}MHz"
    v = hz / 1e3
    return f"{v:g}kHz"


def cell_key(kind: str, bandwidth_hz: float) -> str:
    return f"{kind}@{bandwidth_label(bandwidth_hz)}"


def true_negative_rate(flags: np.ndarray) -> float:
    """Share of benign rows NOT flagged."""
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        raise ValueError("no rows")
    return float(1.0 - flags.mean())


def true_positive_rate(flags: np.ndarray) -> float:
    """Share of attacked rows flagged."""
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        raise ValueError("no rows")
    return float(flags.mean())


def exclusion_combinations(device_ids: Sequence[str], k: int) -> List[Tuple[str, ...]]:
    """All size-k excluded sets, deterministic lexicographic order."""
    ids = sorted(device_ids)
    if not 0 < k < len(ids):
        raise ValueError("k must leave at least one device on each side")
    return list(itertools.combinations(ids, k))


@dataclass
class ExperimentSpec:
    """Everything a harness run depends on; serializable for the CLI."""

    kind: str = "global"
    detectors: Tuple[str, ...] = DETECTOR_KINDS
    benign_hours: float = 8.0
    attack_hours: float = 2.0
    seed: int = 0
    attacks: Tuple[str, ...] = ATTACK_KINDS
    bandwidths: Tuple[float, ...] = GRID_BANDWIDTHS_HZ
    noise_db: float = DEFAULT_NOISE_DB
    delay_s: float = DEFAULT_DELAY_S
    device_type: str = "rpi3-like"
    excluded_counts: Tuple[int, ...] = (1, 2, 3, 4, 5)
    device_type_tpr: bool = False
    layout: Tuple[Tuple[str, int], ...] = FLEET_LAYOUT

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        for d in self.detectors:
            if d not in DETECTOR_KINDS:
                raise ValueError(f"unknown detector {d!r}")
        for a in self.attacks:
            if a not in ATTACK_KINDS:
                raise ValueError(f"unknown attack {a!r}")
        self.detectors = tuple(self.detectors)
        self.attacks = tuple(self.attacks)
        self.bandwidths = tuple(float(b) for b in self.bandwidths)
        self.excluded_counts = tuple(int(k) for k in self.excluded_counts)
        self.layout = tuple((str(t), int(n)) for t, n in self.layout)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "detectors": list(self.detectors),
            "benign_hours": self.benign_hours,
            "attack_hours": self.attack_hours,
            "seed": self.seed,
            "attacks": list(self.attacks),
            "bandwidths": list(self.bandwidths),
            "noise_db": self.noise_db,
            "delay_s": self.delay_s,
            "device_type": self.device_type,
            "excluded_counts": list(self.excluded_counts),
            "device_type_tpr": self.device_type_tpr,
            "layout": [list(x) for x in self.layout],
        }

    @staticmethod
    def from_json(doc: dict) -> "ExperimentSpec":
        known = {
            "kind", "detectors", "benign_hours", "attack_hours", "seed",
            "attacks", "bandwidths", "noise_db", "delay_s", "device_type",
            "excluded_counts", "device_type_tpr", "layout",
        }
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown experiment spec keys: {sorted(unknown)}")
        kw = dict(doc)
        for key in ("detectors", "attacks", "bandwidths", "excluded_counts"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "layout" in kw:
            kw["layout"] = tuple((str(t), int(n)) for t, n in kw["layout"])
        return ExperimentSpec(**kw)


@dataclass
class MetricsReport:
    """Results of one harness run, serializable and diffable.

    ``timing`` holds wall-clock stage times and is excluded from the
    reproducibility comparison (it is the one thing reruns may not
    repeat)."""

    experiment: str
    seed: int
    feature_names: Tuple[str, ...]
    detectors: Tuple[str, ...]
    attacks: Tuple[str, ...]
    bandwidths: Tuple[float, ...]
    tnr_overall: Dict[str, float] = field(default_factory=dict)
    tnr_per_device: Dict[str, Dict[str, float]] = field(default_factory=dict)
    tpr_cells: Dict[str, Dict[str, float]] = field(default_factory=dict)
    exclusion_curve: Dict[str, Dict[str, dict]] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)
    scoring_seconds_per_vector: Dict[str, float] = field(default_factory=dict)
    timing: Dict[str, float] = field(default_factory=dict)

    def to_json(self, include_timing: bool = True) -> dict:
        doc = {
            "experiment": self.experiment,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "detectors": list(self.detectors),
            "attacks": list(self.attacks),
            "bandwidths": list(self.bandwidths),
            "tnr_overall": self.tnr_overall,
            "tnr_per_device": self.tnr_per_device,
            "tpr_cells": self.tpr_cells,
            "exclusion_curve": self.exclusion_curve,
            "counts": self.counts,
        }
        if include_timing:
            doc["timing"] = self.timing
            doc["scoring_seconds_per_vector"] = self.scoring_seconds_per_vector
        return doc

    def write_json(self, path: str, include_timing: bool = True) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(include_timing), fh, indent=1, sort_keys=True)

    @staticmethod
    def from_json(doc: dict) -> "MetricsReport":
        return MetricsReport(
            experiment=doc["experiment"],
            seed=int(doc["seed"]),
            feature_names=tuple(doc["feature_names"]),
            detectors=tuple(doc["detectors"]),
            attacks=tuple(doc["attacks"]),
            bandwidths=tuple(float(b) for b in doc["bandwidths"]),
            tnr_overall=dict(doc.get("tnr_overall", {})),
            tnr_per_device={k: dict(v) for k, v in doc.get("tnr_per_device", {}).items()},
            tpr_cells={k: dict(v) for k, v in doc.get("tpr_cells", {}).items()},
            exclusion_curve={k: dict(v) for k, v in doc.get("exclusion_curve", {}).items()},
            counts=dict(doc.get("counts", {})),
            scoring_seconds_per_vector=dict(doc.get("scoring_seconds_per_vector", {})),
            timing=dict(doc.get("timing", {})),
        )

    def write_csv(self, path: str) -> None:
        """Flat rows: metric,detector,subject,value."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("metric,detector,subject,value\n")
            for det, v in sorted(self.tnr_overall.items()):
                fh.write(f"tnr_overall,{det},,{v:.6f}\n")
            for det, per in sorted(self.tnr_per_device.items()):
                for dev, v in sorted(per.items()):
                    fh.write(f"tnr,{det},{dev},{v:.6f}\n")
            for det, cells in sorted(self.tpr_cells.items()):
                for cell, v in sorted(cells.items()):
                    fh.write(f"tpr,{det},{cell},{v:.6f}\n")
            for det, curve in sorted(self.exclusion_curve.items()):
                for frac, info in sorted(curve.items()):
                    fh.write(f"tnr_excluded,{det},{frac},{info['tnr_mean']:.6f}\n")

    def to_markdown(self) -> str:
        lines = [f"# {self.experiment} experiment (seed {self.seed})", ""]
        if self.tnr_overall:
            lines.append("## Benign hold-out (TNR)")
            lines.append("")
            lines.append("| detector | overall TNR |")
            lines.append("|---|---|")
            for det in self.detectors:
                if det in self.tnr_overall:
                    lines.append(f"| {det} | {self.tnr_overall[det]:.3f} |")
            lines.append("")
        if self.tpr_cells:
            bw_labels = [bandwidth_label(b) for b in self.bandwidths]
            for det in self.detectors:
                cells = self.tpr_cells.get(det)
                if not cells:
                    continue
                lines.append(f"## Attack detection (TPR), {det}")
                lines.append("")
                lines.append("| attack | " + " | ".join(bw_labels) + " |")
                lines.append("|---" * (len(bw_labels) + 1) + "|")
                for atk in self.attacks:
                    row = [atk]
                    for b in self.bandwidths:
                        v = cells.get(cell_key(atk, b))
                        row.append("-" if v is None else f"{v:.2f}")
                    lines.append("| " + " | ".join(row) + " |")
                lines.append("")
        if self.exclusion_curve:
            lines.append("## Excluded-device TNR by excluded share")
            lines.append("")
            fracs = None
            for det in self.detectors:
                curve = self.exclusion_curve.get(det)
                if not curve:
                    continue
                if fracs is None:
                    fracs = sorted(curve, key=float)
                    lines.append("| detector | " + " | ".join(fracs) + " |")
                    lines.append("|---" * (len(fracs) + 1) + "|")
                lines.append(
                    f"| {det} | "
                    + " | ".join(f"{curve[f]['tnr_mean']:.3f}" for f in fracs)
                    + " |"
                )
            lines.append("")
        lines.append("## Counts")
        lines.append("")
        for k, v in sorted(self.counts.items()):
            lines.append(f"- {k}: {v}")
        lines.append("")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# shared plumbing


def _balanced(frames: Dict[str, VectorFrame]) -> Dict[str, VectorFrame]:
    """Trim every device to the same row count (chronological head)."""
    n = min(f.matrix.shape[0] for f in frames.values())
    out = {}
    for sid, f in frames.items():
        out[sid] = VectorFrame(
            sensor_id=f.sensor_id,
            timestamps=f.timestamps[:n].copy(),
            matrix=f.matrix[:n].copy(),
            feature_names=f.feature_names,
            window_s=f.window_s,
        )
    return out


def device_test_matrix(
    frame: VectorFrame,
    kept: Sequence[str],
    ratios: Tuple[float, float, float] = SPLIT_RATIOS,
) -> np.ndarray:
    """A device's raw held-out benign tail in the selected feature space."""
    keep, _ = remove_noisy_vectors(frame.matrix)
    idx = [frame.feature_names.index(n) for n in kept]
    X = frame.matrix[keep][:, idx]
    _, _, te = chronological_split(X.shape[0], ratios)
    return X[te]


def device_benign_matrix(frame: VectorFrame, kept: Sequence[str]) -> np.ndarray:
    """A device's full scrubbed benign stream in the selected feature space.

    Used for devices a model never trained on, where every row is fair
    evaluation material."""
    keep, _ = remove_noisy_vectors(frame.matrix)
    idx = [frame.feature_names.index(n) for n in kept]
    return frame.matrix[keep][:, idx]


class _Scorer:
    """classify_matrix with per-detector wall time accounting."""

    def __init__(self):
        self.seconds: Dict[str, float] = {}
        self.rows: Dict[str, int] = {}

    def flags(self, det: str, model, X: np.ndarray) -> np.ndarray:
        t0 = time.perf_counter()
        out = classify_matrix(model, X)
        self.seconds[det] = self.seconds.get(det, 0.0) + (time.perf_counter() - t0)
        self.rows[det] = self.rows.get(det, 0) + int(X.shape[0])
        return out

    def per_vector(self) -> Dict[str, float]:
        return {
            det: (self.seconds[det] / self.rows[det]) if self.rows.get(det) else 0.0
            for det in self.seconds
        }


def _mean(values) -> float:
    vals = list(values)
    return float(sum(vals) / len(vals)) if vals else float("nan")


# ---------------------------------------------------------------------------
# the harness


def run_experiment(spec: ExperimentSpec) -> MetricsReport:
    t_all = time.perf_counter()
    timing: Dict[str, float] = {}

    t0 = time.perf_counter()
    fleet = build_fleet(spec.seed, layout=spec.layout, benign_hours=spec.benign_hours)
    benign = fleet_benign_frames(fleet, spec.benign_hours, spec.seed)
    plans = attack_plan_grid(
        kinds=spec.attacks,
        bandwidths=spec.bandwidths,
        noise_db=spec.noise_db,
        delay_s=spec.delay_s,
        seed=spec.seed,
    )
    t_attacks = rows_for_hours(spec.benign_hours) * CADENCE_S
    attacked = fleet_attack_frames(fleet, plans, spec.attack_hours, spec.seed, t_attacks)
    timing["synthesis_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    selection = fit_feature_selection(benign)
    timing["feature_selection_s"] = time.perf_counter() - t0

    report = MetricsReport(
        experiment=spec.kind,
        seed=spec.seed,
        feature_names=selection.kept,
        detectors=spec.detectors,
        attacks=spec.attacks,
        bandwidths=spec.bandwidths,
    )
    scorer = _Scorer()

    if spec.kind == "individual":
        _run_individual(spec, benign, attacked, selection, report, scorer, timing)
    elif spec.kind == "global":
        _run_global(spec, benign, attacked, selection, report, scorer, timing)
    else:
        _run_device_type(spec, fleet, benign, attacked, selection, report, scorer, timing)

    report.scoring_seconds_per_vector = scorer.per_vector()
    timing["total_s"] = time.perf_counter() - t_all
    report.timing = timing
    return report


def _run_individual(spec, benign, attacked, selection, report, scorer, timing):
    t_train = 0.0
    n_models = 0
    n_benign_ds = 0
    n_attack_ds = 0
    tnr_dev: Dict[str, Dict[str, float]] = {d: {} for d in spec.detectors}
    tpr_rows: Dict[str, Dict[str, List[np.ndarray]]] = {
        d: {} for d in spec.detectors
    }
    for sid in sorted(benign):
        ds = curate({sid: benign[sid]}, selection=selection)
        n_benign_ds += 1
        for det in spec.detectors:
            t0 = time.perf_counter()
            model = train_detector(det, ds.train, ds.feature_names, ds.norm_min, ds.norm_max, seed=spec.seed)
            t_train += time.perf_counter() - t0
            n_models += 1
            tnr_dev[det][sid] = true_negative_rate(scorer.flags(det, model, ds.test))
            for cell, frames in attacked.items():
                X = ds.normalize(frames[sid].select(ds.feature_names).matrix)
                key = cell_key(*cell)
                tpr_rows[det].setdefault(key, []).append(scorer.flags(det, model, X))
                if det == spec.detectors[0]:
                    n_attack_ds += 1
    for det in spec.detectors:
        report.tnr_per_device[det] = tnr_dev[det]
        report.tnr_overall[det] = _mean(tnr_dev[det].values())
        report.tpr_cells[det] = {
            key: true_positive_rate(np.concatenate(rows))
            for key, rows in tpr_rows[det].items()
        }
    report.counts = {
        "models": n_models,
        "devices": len(benign),
        "benign_datasets_per_device": 1,
        "attack_datasets_per_device": n_attack_ds // max(len(benign), 1),
        "datasets_total": n_benign_ds + n_attack_ds,
    }
    timing["training_s"] = t_train


def _run_global(spec, benign, attacked, selection, report, scorer, timing):
    ds = curate(_balanced(benign), selection=selection)
    t_train = 0.0
    for det in spec.detectors:
        t0 = time.perf_counter()
        model = train_detector(det, ds.train, ds.feature_names, ds.norm_min, ds.norm_max, seed=spec.seed)
        t_train += time.perf_counter() - t0
        flags = scorer.flags(det, model, ds.test)
        report.tnr_overall[det] = true_negative_rate(flags)
        per_dev = {}
        for sid in sorted(benign):
            mask = ds.test_sensors == sid
            if mask.any():
                per_dev[sid] = true_negative_rate(flags[mask])
        report.tnr_per_device[det] = per_dev
        cells = {}
        for cell, frames in attacked.items():
            parts = [
                scorer.flags(det, model, ds.normalize(frames[sid].select(ds.feature_names).matrix))
                for sid in sorted(frames)
            ]
            cells[cell_key(*cell)] = true_positive_rate(np.concatenate(parts))
        report.tpr_cells[det] = cells
    report.counts = {
        "models": len(spec.detectors),
        "devices": len(benign),
        "benign_datasets": 1,
        "attack_datasets": len(attacked),
    }
    timing["training_s"] = t_train


def _run_device_type(spec, fleet, benign, attacked, selection, report, scorer, timing):
    type_ids = sorted(sid for sid, p in fleet.items() if p.device_type == spec.device_type)
    if len(type_ids) < 2:
        raise ValueError(f"need at least two {spec.device_type} devices for exclusion")
    t_train = 0.0
    n_models = 0
    n_combos = 0
    curve: Dict[str, Dict[str, dict]] = {d: {} for d in spec.detectors}
    tpr_rows: Dict[str, Dict[str, List[np.ndarray]]] = {d: {} for d in spec.detectors}
    for k in spec.excluded_counts:
        combos = exclusion_combinations(type_ids, k)
        label = f"{EXCLUDED_FRACTION_LABELS.get(k, k / len(type_ids)):.2f}"
        per_combo: Dict[str, List[float]] = {d: [] for d in spec.detectors}
        for excluded in combos:
            n_combos += 1
            included = {sid: benign[sid] for sid in type_ids if sid not in excluded}
            ds = curate(included, selection=selection)
            for det in spec.detectors:
                t0 = time.perf_counter()
                model = train_detector(det, ds.train, ds.feature_names, ds.norm_min, ds.norm_max, seed=spec.seed)
                t_train += time.perf_counter() - t0
                n_models += 1
                tails = [
                    ds.normalize(device_benign_matrix(benign[sid], ds.feature_names))
                    for sid in excluded
                ]
                flags = scorer.flags(det, model, np.vstack(tails))
                per_combo[det].append(true_negative_rate(flags))
                if spec.device_type_tpr:
                    for cell, frames in attacked.items():
                        key = cell_key(*cell)
                        parts = [
                            scorer.flags(det, model, ds.normalize(frames[sid].select(ds.feature_names).matrix))
                            for sid in excluded
                        ]
                        tpr_rows[det].setdefault(key, []).append(np.concatenate(parts))
        for det in spec.detectors:
            curve[det][label] = {
                "excluded_count": k,
                "combos": len(combos),
                "tnr_mean": _mean(per_combo[det]),
                "tnr_per_combo": [float(v) for v in per_combo[det]],
            }
    for det in spec.detectors:
        report.exclusion_curve[det] = curve[det]
        report.tnr_overall[det] = _mean(
            v for info in curve[det].values() for v in info["tnr_per_combo"]
        )
        if spec.device_type_tpr:
            report.tpr_cells[det] = {
                key: true_positive_rate(np.concatenate(rows))
                for key, rows in tpr_rows[det].items()
            }
    report.counts = {
        "models": n_models,
        "devices": len(type_ids),
        "combos": n_combos,
    }
    timing["training_s"] = t_train
