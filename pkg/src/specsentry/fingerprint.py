"""Kernel-event behavioral fingerprints.

A sensor's behavior over one monitoring window is a vector of kernel
event counts over a fixed 67-event catalog spanning seven resource
families.  40 of the events are the selected features the detection
pipeline keeps after curation; the rest exist so the curation stage has
something real to drop (constant, near-constant, redundant, or drifting
columns).

Synthetic vectors are log-normal baseline draws per event, shifted by a
calibrated coupling between attack operation tallies and event counts.
The coupling puts file *reads* in a blind spot: no selected feature
responds to them, which is what leaves replay-style attacks barely
detectable.  Calibration constants live in ``data/calibration.json``,
not in code.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from specsentry._rand import rng_at, rng_for
from specsentry.attacks import OP_NAMES, OpTally

FAMILIES = (
    "network",
    "virtual_memory",
    "file_systems",
    "scheduler",
    "cpu",
    "device_drivers",
    "random_numbers",
)

DEVICE_TYPES = ("rpi3-like", "rpi4-like")

# monitoring window and the full capture-process-score cadence, seconds
WINDOW_S = 50.0
CADENCE_S = 56.8


@dataclass(frozen=True)
class CatalogEvent:
    name: str
    family: str
    selected: bool


def _catalog() -> Tuple[CatalogEvent, ...]:
    raw = {
        "network": [
            ("fib:fib_table_lookup", True),
            ("net:net_dev_queue", True),
            ("net:net_dev_xmit", True),
            ("qdisc:qdisc_dequeue", False),
            ("skb:consume_skb", False),
            ("skb:kfree_skb", True),
            ("skb:skb_copy_datagram_iovec", False),
            ("sock:inet_sock_set_state", False),
            ("tcp:tcp_destroy_sock", False),
            ("tcp:tcp_probe", True),
            ("udp:udp_fail_queue_rcv_skb", False),
        ],
        "virtual_memory": [
            ("kmem:kfree", False),
            ("kmem:kmalloc", False),
            ("kmem:kmem_cache_alloc", True),
            ("kmem:kmem_cache_free", True),
            ("kmem:mm_page_alloc", False),
            ("kmem:mm_page_alloc_zone_locked", False),
            ("kmem:mm_page_free", True),
            ("kmem:mm_page_pcpu_drain", True),
            ("page-faults", True),
            ("pagemap:mm_lru_insertion", True),
            ("writeback:global_dirty_state", True),
            ("writeback:sb_clear_inode_writeback", True),
            ("writeback:wbc_writepage", True),
            ("writeback:writeback_dirty_inode", False),
            ("writeback:writeback_dirty_inode_enqueue", True),
            ("writeback:writeback_dirty_page", True),
            ("writeback:writeback_mark_inode_dirty", True),
            ("writeback:writeback_pages_written", False),
            ("writeback:writeback_single_inode", True),
            ("writeback:writeback_write_inode", True),
            ("writeback:writeback_written", True),
        ],
        "file_systems": [
            ("block:block_bio_backmerge", False),
            ("block:block_bio_remap", True),
            ("block:block_dirty_buffer", True),
            ("block:block_getrq", True),
            ("block:block_touch_buffer", True),
            ("block:block_unplug", True),
            ("cachefiles:cachefiles_create", False),
            ("cachefiles:cachefiles_lookup", False),
            ("cachefiles:cachefiles_mark_active", False),
            ("filemap:mm_filemap_add_to_page_cache", True),
            ("jbd2:jbd2_handle_start", True),
            ("jbd2:jbd2_start_commit", True),
        ],
        "scheduler": [
            ("alarmtimer:alarmtimer_fired", False),
            ("alarmtimer:alarmtimer_start", False),
            ("cpu-migrations", True),
            ("cs", False),
            ("sched:sched_process_exec", True),
            ("sched:sched_process_free", True),
            ("sched:sched_process_wait", True),
            ("sched:sched_switch", False),
            ("signal:signal_deliver", False),
            ("signal:signal_generate", True),
            ("task:task_newtask", True),
        ],
        "cpu": [
            ("clk:clk_set_rate", True),
            ("ipi:ipi_raise", True),
            ("rpm:rpm_resume", False),
            ("rpm:rpm_suspend", False),
        ],
        "device_drivers": [
            ("dma_fence:dma_fence_init", False),
            ("gpio:gpio_value", False),
            ("irq:irq_handler_entry", True),
            ("mmc:mmc_request_start", False),
            ("preemptirq:irq_enable", False),
        ],
        "random_numbers": [
            ("random:get_random_bytes", True),
            ("random:mix_pool_bytes_nolock", True),
            ("random:urandom_read", True),
        ],
    }
    events = []
    for family in FAMILIES:
        for name, sel in sorted(raw[family]):
            events.append(CatalogEvent(name=name, family=family, selected=sel))
    return tuple(events)


EVENT_CATALOG: Tuple[CatalogEvent, ...] = _catalog()
EVENT_NAMES: Tuple[str, ...] = tuple(e.name for e in EVENT_CATALOG)
EVENT_INDEX: Dict[str, int] = {e.name: i for i, e in enumerate(EVENT_CATALOG)}
N_EVENTS = len(EVENT_CATALOG)


def event_catalog() -> Tuple[CatalogEvent, ...]:
    """The fixed catalog, ordered by (family, name)."""
    return EVENT_CATALOG


def selected_event_names() -> Tuple[str, ...]:
    return tuple(e.name for e in EVENT_CATALOG if e.selected)


def family_of(name: str) -> str:
    return EVENT_CATALOG[EVENT_INDEX[name]].family


# ---------------------------------------------------------------------------
# calibration


@dataclass
class Calibration:
    dispersion_log: float
    offset_bound: float
    offset_bias_weight: float
    offset_jitter: float
    type_factors: Dict[str, Dict[str, float]]
    events: Dict[str, dict]
    coupling: Dict[str, Dict[str, float]]

    def type_factor(self, device_type: str, family: str) -> float:
        return float(self.type_factors.get(device_type, {}).get(family, 1.0))


def load_calibration(path: Optional[str] = None) -> Calibration:
    if path is None:
        text = resources.files("specsentry").joinpath("data/calibration.json").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    cal = Calibration(
        dispersion_log=float(doc["dispersion_log"]),
        offset_bound=float(doc["offset_bound"]),
        offset_bias_weight=float(doc["offset_bias_weight"]),
        offset_jitter=float(doc["offset_jitter"]),
        type_factors=doc["type_factors"],
        events=doc["events"],
        coupling=doc["coupling"],
    )
    validate_calibration(cal)
    return cal


def validate_calibration(cal: Calibration) -> None:
    """Fail fast if the constants break the blind-spot contract."""
    missing = [n for n in EVENT_NAMES if n not in cal.events]
    if missing:
        raise ValueError(f"calibration missing events: {missing[:3]}...")
    unknown = [n for n in cal.events if n not in EVENT_INDEX]
    if unknown:
        raise ValueError(f"calibration has unknown events: {unknown[:3]}")
    selected = set(selected_event_names())
    for op, targets in cal.coupling.items():
        if op not in OP_NAMES:
            raise ValueError(f"calibration coupling: unknown op {op!r}")
        for name in targets:
            if name not in EVENT_INDEX:
                raise ValueError(f"calibration coupling[{op}]: unknown event {name!r}")
    reads_hit = set(cal.coupling.get("psd_reads", {})) & selected
    if reads_hit:
        raise ValueError(f"psd_reads must not couple to selected features: {sorted(reads_hit)}")
    for name in cal.coupling.get("rng_draws", {}):
        if family_of(name) != "random_numbers":
            raise ValueError(f"rng_draws coupling outside random_numbers: {name}")
    for name in cal.coupling.get("psd_writes", {}):
        if family_of(name) not in ("virtual_memory", "file_systems"):
            raise ValueError(f"psd_writes coupling outside memory/filesystem families: {name}")
    for name in cal.coupling.get("substitutions", {}):
        if family_of(name) != "virtual_memory":
            raise ValueError(f"substitutions coupling outside memory features: {name}")
    for name, ev in cal.events.items():
        role = ev.get("role", "normal")
        if role == "mirror":
            partner = ev.get("partner")
            if partner not in EVENT_INDEX:
                raise ValueError(f"{name}: mirror partner {partner!r} not in catalog")
            if EVENT_INDEX[partner] >= EVENT_INDEX[name]:
                raise ValueError(f"{name}: mirror partner must precede it in catalog order")


# ---------------------------------------------------------------------------
# device profiles


@dataclass
class DeviceProfile:
    """Per-device baseline model: type-level means, bounded offsets.

    ``bias`` in [-1, 1] positions the device inside the fleet's offset
    envelope; offsets per event stay within ``offset_bound`` of the type
    mean.  ``t_step`` anchors the mid-stream level shift of drifting
    events; ``drift_factor`` carries cross-device level differences of
    the non-IID events.
    """

    sensor_id: str
    device_type: str
    seed: int
    bias: float = 0.0
    window_s: float = WINDOW_S
    cadence_s: float = CADENCE_S
    t_step: Optional[float] = None
    # computed baseline arrays, one slot per catalog event
    base_mean: np.ndarray = field(default=None, repr=False)
    sigma_log: np.ndarray = field(default=None, repr=False)
    offsets: np.ndarray = field(default=None, repr=False)
    drift_factor: np.ndarray = field(default=None, repr=False)
    calibration: Calibration = field(default=None, repr=False)


def build_device_profile(
    sensor_id: str,
    device_type: str,
    seed: int,
    calibration: Optional[Calibration] = None,
    bias: float = 0.0,
    t_step: Optional[float] = None,
) -> DeviceProfile:
    if device_type not in DEVICE_TYPES:
        raise ValueError(f"unknown device type {device_type!r}")
    cal = calibration if calibration is not None else load_calibration()
    n = N_EVENTS
    base_mean = np.zeros(n)
    sigma = np.full(n, cal.dispersion_log)
    for i, ev in enumerate(EVENT_CATALOG):
        stats = cal.events[ev.name]
        mean = float(stats.get("mean", 1.0))
        base_mean[i] = mean * cal.type_factor(device_type, ev.family)
        if "dispersion_log" in stats:
            sigma[i] = float(stats["dispersion_log"])

    z = rng_for(seed, "device-offsets", sensor_id).standard_normal(n)
    bound = math.log1p(cal.offset_bound)
    log_off = np.clip(cal.offset_bias_weight * bias + cal.offset_jitter * z, -bound, bound)
    offsets = np.exp(log_off)

    drift = np.ones(n)
    drng = rng_for(seed, "device-drift", sensor_id)
    for i, ev in enumerate(EVENT_CATALOG):
        stats = cal.events[ev.name]
        if stats.get("role") == "drift_device":
            spread = float(stats.get("spread_log", 0.8))
            drift[i] = math.exp(spread * bias + 0.2 * drng.standard_normal())

    return DeviceProfile(
        sensor_id=sensor_id,
        device_type=device_type,
        seed=int(seed),
        bias=float(bias),
        t_step=t_step,
        base_mean=base_mean,
        sigma_log=sigma,
        offsets=offsets,
        drift_factor=drift,
        calibration=cal,
    )


def coupling_matrix(cal: Calibration, device_type: str = "rpi3-like") -> np.ndarray:
    """(n_ops, n_events) count deltas per unit operation."""
    mat = np.zeros((len(OP_NAMES), N_EVENTS))
    for oi, op in enumerate(OP_NAMES):
        for name, kappa in cal.coupling.get(op, {}).items():
            i = EVENT_INDEX[name]
            ev = EVENT_CATALOG[i]
            mean = float(cal.events[name].get("mean", 1.0)) * cal.type_factor(device_type, ev.family)
            mat[oi, i] = float(kappa) * mean
    return mat


# ---------------------------------------------------------------------------
# synthesis


def _profile_coupling(profile: DeviceProfile) -> np.ndarray:
    cached = getattr(profile, "_coupling_cache", None)
    if cached is None:
        cached = coupling_matrix(profile.calibration, profile.device_type)
        object.__setattr__(profile, "_coupling_cache", cached)
    return cached


def _row_counts(profile: DeviceProfile, tally_arr: np.ndarray, timestamp: float, seed: int) -> np.ndarray:
    """Integer counts for one window; deterministic per (profile, tally, seed, timestamp)."""
    cal = profile.calibration
    idx = int(round(timestamp / profile.cadence_s))
    rng = rng_at(seed, "fingerprint", profile.sensor_id, step=idx, stride=512)
    z = rng.standard_normal(N_EVENTS)
    u = rng.uniform(size=N_EVENTS)

    mean = profile.base_mean * profile.offsets * profile.drift_factor
    counts = np.empty(N_EVENTS)
    # first pass: baseline roles in catalog order (mirror partners precede mirrors)
    for i, ev in enumerate(EVENT_CATALOG):
        stats = cal.events[ev.name]
        role = stats.get("role", "normal")
        if role == "constant":
            counts[i] = float(stats.get("value", 0.0))
        elif role == "rare":
            counts[i] = (1.0 + (z[i] > 0.0)) if u[i] < float(stats.get("p", 0.001)) else 0.0
        elif role == "mirror":
            j = EVENT_INDEX[stats["partner"]]
            scale = float(stats.get("scale", 1.0))
            noise = float(stats.get("noise", 0.01))
            counts[i] = scale * counts[j] + noise * scale * mean[j] * z[i]
        else:
            m = mean[i]
            if role == "drift_time" and profile.t_step is not None and timestamp >= profile.t_step:
                m = m * (1.0 + float(stats.get("amp", 0.5)))
            s = profile.sigma_log[i]
            counts[i] = math.exp(math.log(max(m, 1e-9)) - 0.5 * s * s + s * z[i])

    counts = counts + _profile_coupling(profile).T @ tally_arr
    return np.maximum(np.rint(counts), 0.0).astype(np.int64)


def synthesize_behavior_vector(
    profile: DeviceProfile,
    tally: OpTally,
    window_s: Optional[float] = None,
    seed: int = 0,
    timestamp: float = 0.0,
) -> "BehaviorVector":
    """One behavior vector for a window carrying the given attack tally.

    A zero tally gives the benign baseline.  Counts are reproducible for
    (profile, tally, seed, timestamp) regardless of call order.
    """
    counts = _row_counts(profile, tally.as_array(), timestamp, seed)
    return BehaviorVector(
        sensor_id=profile.sensor_id,
        timestamp=float(timestamp),
        window_s=float(window_s if window_s is not None else profile.window_s),
        counts={name: int(c) for name, c in zip(EVENT_NAMES, counts)},
    )


def synthesize_stream(
    profile: DeviceProfile,
    tallies: np.ndarray,
    timestamps: np.ndarray,
    seed: int = 0,
) -> np.ndarray:
    """(n_windows, n_events) count matrix; row r equals the single-vector
    call at (tallies[r], timestamps[r])."""
    tallies = np.asarray(tallies, dtype=np.float64)
    if tallies.ndim != 2 or tallies.shape[1] != len(OP_NAMES):
        raise ValueError(f"tallies must be (n, {len(OP_NAMES)})")
    out = np.empty((tallies.shape[0], N_EVENTS), dtype=np.int64)
    for r in range(tallies.shape[0]):
        out[r] = _row_counts(profile, tallies[r], float(timestamps[r]), seed)
    return out


# ---------------------------------------------------------------------------
# behavior vectors and the perf-stat bridge


@dataclass
class BehaviorVector:
    sensor_id: str
    timestamp: float
    window_s: float
    counts: Dict[str, int]
    warnings: Tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "sensor_id": self.sensor_id,
                "timestamp": self.timestamp,
                "window_s": self.window_s,
                "counts": {k: int(v) for k, v in self.counts.items()},
            }
        )

    def as_array(self, names: Sequence[str] = EVENT_NAMES) -> np.ndarray:
        return np.array([self.counts[n] for n in names], dtype=np.float64)

    @staticmethod
    def from_json(text: str) -> "BehaviorVector":
        doc = json.loads(text)
        validate_vector_doc(doc)
        return BehaviorVector(
            sensor_id=doc["sensor_id"],
            timestamp=float(doc["timestamp"]),
            window_s=float(doc["window_s"]),
            counts={k: int(v) for k, v in doc["counts"].items()},
        )


def validate_vector_doc(doc: dict) -> None:
    """Schema check for wire-format vectors; raises naming the offender."""
    if not isinstance(doc, dict):
        raise ValueError("vector must be a JSON object")
    for key in ("sensor_id", "timestamp", "window_s", "counts"):
        if key not in doc:
            raise ValueError(f"vector missing field {key!r}")
    if not isinstance(doc["sensor_id"], str) or not doc["sensor_id"]:
        raise ValueError("sensor_id must be a non-empty string")
    for key in ("timestamp", "window_s"):
        v = doc[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise ValueError(f"{key} must be a finite number")
    counts = doc["counts"]
    if not isinstance(counts, dict):
        raise ValueError("counts must be an object")
    for name in EVENT_NAMES:
        if name not in counts:
            raise ValueError(f"counts missing catalog event {name!r}")
    for name, v in counts.items():
        if name not in EVENT_INDEX:
            raise ValueError(f"counts has unknown event {name!r}")
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ValueError(f"count for {name!r} must be a non-negative integer")


class PerfParseError(ValueError):
    pass


def parse_perf_stat(text: str) -> BehaviorVector:
    """Parse machine-readable counter output into a behavior vector.

    Expected shape: metadata comment lines (``# timestamp: <epoch s>``
    required; ``# sensor_id:`` and ``# window_s:`` optional) followed by
    one CSV line per counter: ``value,unit,event[,...]``.  Line order is
    irrelevant.  ``<not counted>`` / ``<not supported>`` map to 0 with a
    warning; catalog events absent from the text also map to 0 with a
    warning; malformed lines raise naming the line number.
    """
    meta: Dict[str, str] = {}
    counts: Dict[str, int] = {}
    warnings: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if ":" in body:
                key, val = body.split(":", 1)
                meta[key.strip()] = val.strip()
            continue
        parts = line.split(",")
        if len(parts) < 3:
            raise PerfParseError(f"line {lineno}: expected value,unit,event[,...]: {raw!r}")
        value_raw, _unit, event = parts[0].strip(), parts[1].strip(), parts[2].strip()
        if not event:
            raise PerfParseError(f"line {lineno}: empty event name")
        if event not in EVENT_INDEX:
            warnings.append(f"line {lineno}: event {event!r} not in catalog, ignored")
            continue
        if value_raw in ("<not counted>", "<not supported>"):
            counts[event] = 0
            warnings.append(f"line {lineno}: {event} {value_raw}, counted as 0")
            continue
        try:
            counts[event] = int(float(value_raw.replace(" ", "")))
        except ValueError as exc:
            raise PerfParseError(f"line {lineno}: bad counter value {value_raw!r}") from exc

    if "timestamp" not in meta:
        raise PerfParseError("missing '# timestamp:' metadata line")
    try:
        timestamp = float(meta["timestamp"])
    except ValueError as exc:
        raise PerfParseError(f"bad timestamp metadata: {meta['timestamp']!r}") from exc
    window_s = float(meta.get("window_s", WINDOW_S))
    sensor_id = meta.get("sensor_id", "perf-host")

    for name in EVENT_NAMES:
        if name not in counts:
            counts[name] = 0
            warnings.append(f"event {name!r} missing from input, counted as 0")
    ordered = {name: counts[name] for name in EVENT_NAMES}
    return BehaviorVector(
        sensor_id=sensor_id,
        timestamp=timestamp,
        window_s=window_s,
        counts=ordered,
        warnings=tuple(warnings),
    )
