"""Fleet dataset synthesis.

Builds the nine-device fleet, its benign vector streams, and the attack
vector streams for the full kind x bandwidth grid.  Attack streams are
driven by the analytic per-cycle tallies (``expected_tally``), which the
tests pin against the actual PSD transformers, so fleet-scale synthesis
never has to materialize 157,920-bin scan cycles.
"""

import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from specsentry.attacks import ATTACK_KINDS, AttackConfig, AttackPlan, resolve_attack, tally_matrix
from specsentry.curation import VectorFrame
from specsentry.fingerprint import (
    CADENCE_S,
    EVENT_NAMES,
    Calibration,
    DeviceProfile,
    build_device_profile,
    synthesize_stream,
)
from specsentry.spectrum import SpectrumConfig, make_spectrum_config

# fleet: six devices of the smaller type, three of the larger
FLEET_LAYOUT: Tuple[Tuple[str, int], ...] = (("rpi3-like", 6), ("rpi4-like", 3))

# attack grid: every kind at six bandwidths, bands bin-aligned and disjoint.
# The attacked center sits 0.8 MHz above a round number so the widest
# band's lower edge lands exactly on a segment boundary (720.8 MHz =
# segment 292): the 160 MHz cell then touches ceil(160/2.4) = 67
# segments instead of straddling a partial segment at both ends.
GRID_BANDWIDTHS_HZ = (20e3, 200e3, 2e6, 20e6, 80e6, 160e6)
ATTACKED_CENTER_HZ = 800.8e6
SOURCE_CENTER_HZ = 600.8e6
DEFAULT_NOISE_DB = 10.0
DEFAULT_DELAY_S = 300.0


def rows_for_hours(hours: float, cadence_s: float = CADENCE_S) -> int:
    """Vector windows emitted over a span (one row per cadence tick)."""
    return int(math.floor(hours * 3600.0 / cadence_s))


def fleet_biases(n: int) -> np.ndarray:
    """Deterministic per-type placement inside the offset envelope."""
    if n == 1:
        return np.array([0.0])
    return np.linspace(-1.0, 1.0, n)


def build_fleet(
    seed: int,
    calibration: Optional[Calibration] = None,
    layout: Tuple[Tuple[str, int], ...] = FLEET_LAYOUT,
    benign_hours: float = 8.0,
) -> Dict[str, DeviceProfile]:
    """Device profiles keyed by sensor id, smaller type first.

    Sensor ids follow "<type-prefix>-<index>" (rpi3-01 .. rpi3-06,
    rpi4-01 ..).  The mid-stream level shift of time-drifting events is
    anchored at half the benign span.
    """
    t_step = benign_hours * 3600.0 / 2.0
    fleet: Dict[str, DeviceProfile] = {}
    for device_type, count in layout:
        prefix = device_type.split("-")[0]
        biases = fleet_biases(count)
        for i in range(count):
            sensor_id = f"{prefix}-{i + 1:02d}"
            fleet[sensor_id] = build_device_profile(
                sensor_id,
                device_type,
                seed=seed,
                calibration=calibration,
                bias=float(biases[i]),
                t_step=t_step,
            )
    return fleet


def benign_frame(profile: DeviceProfile, hours: float, seed: int) -> VectorFrame:
    """Attack-free vector stream for one device (zero tallies)."""
    n = rows_for_hours(hours, profile.cadence_s)
    if n < 1:
        raise ValueError("span too short for a single window")
    ts = np.arange(n, dtype=np.float64) * profile.cadence_s
    tallies = np.zeros((n, 5))
    counts = synthesize_stream(profile, tallies, ts, seed=seed)
    return VectorFrame(
        sensor_id=profile.sensor_id,
        timestamps=ts,
        matrix=counts.astype(np.float64),
        feature_names=tuple(EVENT_NAMES),
        window_s=profile.window_s,
    )


def fleet_benign_frames(
    fleet: Dict[str, DeviceProfile], hours: float, seed: int
) -> Dict[str, VectorFrame]:
    return {sid: benign_frame(p, hours, seed) for sid, p in fleet.items()}


def grid_attack_config(
    kind: str,
    bandwidth_hz: float,
    noise_db: float = DEFAULT_NOISE_DB,
    delay_s: float = DEFAULT_DELAY_S,
    seed: int = 0,
) -> AttackConfig:
    """One grid cell: attacked band at 800 MHz, source band at 600 MHz."""
    needs_source = kind in ("repeat", "mimic", "spoof", "confusion")
    return AttackConfig(
        kind=kind,
        attacked_center_hz=ATTACKED_CENTER_HZ,
        attacked_bandwidth_hz=bandwidth_hz,
        source_center_hz=SOURCE_CENTER_HZ if needs_source else None,
        source_bandwidth_hz=bandwidth_hz if needs_source else None,
        noise_intensity_db=noise_db if kind in ("noise", "spoof") else 0.0,
        delay_s=delay_s if kind == "delay" else 0.0,
        seed=seed,
    )


def attack_plan_grid(
    spectrum: Optional[SpectrumConfig] = None,
    kinds: Sequence[str] = ATTACK_KINDS,
    bandwidths: Sequence[float] = GRID_BANDWIDTHS_HZ,
    noise_db: float = DEFAULT_NOISE_DB,
    delay_s: float = DEFAULT_DELAY_S,
    seed: int = 0,
) -> Dict[Tuple[str, float], AttackPlan]:
    """Resolved plans for every (kind, bandwidth) cell, grid order."""
    cfg = spectrum if spectrum is not None else make_spectrum_config()
    plans: Dict[Tuple[str, float], AttackPlan] = {}
    for kind in kinds:
        for bw in bandwidths:
            ac = grid_attack_config(kind, bw, noise_db=noise_db, delay_s=delay_s, seed=seed)
            plans[(kind, float(bw))] = resolve_attack(ac, cfg)
    return plans


def attack_frame(
    profile: DeviceProfile,
    plan: AttackPlan,
    hours: float,
    seed: int,
    t_start: float = 0.0,
) -> VectorFrame:
    """Vector stream for one device under one attack.

    Row r carries the tally the attack emits at cycle r+1, so the first
    row includes the setup operations and later rows the steady state.
    """
    n = rows_for_hours(hours, profile.cadence_s)
    if n < 1:
        raise ValueError("span too short for a single window")
    ts = t_start + np.arange(n, dtype=np.float64) * profile.cadence_s
    tallies = tally_matrix(plan, n)
    counts = synthesize_stream(profile, tallies, ts, seed=seed)
    return VectorFrame(
        sensor_id=profile.sensor_id,
        timestamps=ts,
        matrix=counts.astype(np.float64),
        feature_names=tuple(EVENT_NAMES),
        window_s=profile.window_s,
    )


def fleet_attack_frames(
    fleet: Dict[str, DeviceProfile],
    plans: Dict[Tuple[str, float], AttackPlan],
    hours: float,
    seed: int,
    t_start: float = 0.0,
) -> Dict[Tuple[str, float], Dict[str, VectorFrame]]:
    """Per-cell, per-device attack streams for the whole grid."""
    out: Dict[Tuple[str, float], Dict[str, VectorFrame]] = {}
    for cell, plan in plans.items():
        out[cell] = {
            sid: attack_frame(p, plan, hours, seed, t_start) for sid, p in fleet.items()
        }
    return out
