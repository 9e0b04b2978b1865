"""Spectrum scan-cycle model.

A sensor sweeps a wide band in fixed-width segments, recording a PSD
value per frequency bin.  The default geometry covers 20 MHz to 1.6 GHz
in 2.4 MHz segments of 240 bins, i.e. 10 kHz resolution and one ~50 s
sweep per cycle.  PSD composition is an additive power-in-dB
approximation: noise floor + Gaussian sensor noise + the power of every
active transmission covering a bin.

Noise draws are counter-keyed per (seed, sensor_id, cycle_index) and do
not depend on the transmission scenario, so two runs that differ only in
scenario content produce bitwise-identical values in untouched bins.
"""

import configparser
import io
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from specsentry._rand import rng_for


@dataclass(frozen=True)
class SpectrumConfig:
    start_hz: float
    end_hz: float
    segment_width_hz: float
    bins_per_segment: int
    cycle_duration_s: float
    noise_floor_db: float
    noise_sigma_db: float

    @property
    def n_segments(self) -> int:
        return int(np.floor((self.end_hz - self.start_hz) / self.segment_width_hz))

    @property
    def n_bins(self) -> int:
        return self.n_segments * self.bins_per_segment

    @property
    def bin_width_hz(self) -> float:
        return self.segment_width_hz / self.bins_per_segment

    def bin_start_hz(self, flat_bin: int) -> float:
        seg, b = divmod(int(flat_bin), self.bins_per_segment)
        return self.start_hz + seg * self.segment_width_hz + b * self.bin_width_hz


@dataclass(frozen=True)
class Transmission:
    name: str
    center_hz: float
    bandwidth_hz: float
    power_db: float
    duty_cycle: float = 1.0


@dataclass
class ScanCycle:
    """One full sweep: the PSD matrix plus its place on the timeline."""

    cycle_index: int
    psd: np.ndarray  # (n_segments, bins_per_segment), dB
    t_start: float = 0.0
    duration_s: float = 50.0

    def segment_times(self, n_segments: Optional[int] = None) -> np.ndarray:
        """Sweep timestamps, ascending with segment frequency."""
        n = self.psd.shape[0] if n_segments is None else n_segments
        return self.t_start + np.arange(n) * (self.duration_s / n)


@dataclass(frozen=True)
class BandSpan:
    """Segment/bin coverage of a frequency band within a config."""

    segment_indices: np.ndarray  # ascending, unique
    bin_indices: np.ndarray      # flat = segment * bins_per_segment + bin, ascending

    @property
    def n_segments(self) -> int:
        return int(self.segment_indices.size)

    @property
    def n_bins(self) -> int:
        return int(self.bin_indices.size)


def make_spectrum_config(
    start_hz: float = 20e6,
    end_hz: float = 1.6e9,
    segment_width_hz: float = 2.4e6,
    bins_per_segment: int = 240,
    cycle_duration_s: float = 50.0,
    noise_floor_db: float = -100.0,
    noise_sigma_db: float = 1.0,
) -> SpectrumConfig:
    if end_hz <= start_hz:
        raise ValueError("end_hz must exceed start_hz")
    if segment_width_hz <= 0 or bins_per_segment <= 0:
        raise ValueError("segment geometry must be positive")
    cfg = SpectrumConfig(
        start_hz=float(start_hz),
        end_hz=float(end_hz),
        segment_width_hz=float(segment_width_hz),
        bins_per_segment=int(bins_per_segment),
        cycle_duration_s=float(cycle_duration_s),
        noise_floor_db=float(noise_floor_db),
        noise_sigma_db=float(noise_sigma_db),
    )
    if cfg.n_segments < 1:
        raise ValueError("band narrower than one segment")
    return cfg


def segments_for_band(config: SpectrumConfig, center_hz: float, bandwidth_hz: float) -> BandSpan:
    """Segment and bin indices whose support intersects the band.

    Bins are half-open [start, start+width); a band edge that lands
    exactly on a bin boundary does not pull in the neighbouring bin,
    while a band straddling a boundary counts bins on both sides.
    """
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth_hz must be positive")
    lo = center_hz - bandwidth_hz / 2.0
    hi = center_hz + bandwidth_hz / 2.0
    if hi <= config.start_hz or lo >= config.start_hz + config.n_segments * config.segment_width_hz:
        return BandSpan(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    binw = config.bin_width_hz
    # first bin whose end exceeds lo, last bin whose start is below hi
    first = int(np.floor((lo - config.start_hz) / binw))
    if config.start_hz + (first + 1) * binw <= lo:
        first += 1
    first = max(first, 0)
    last = int(np.ceil((hi - config.start_hz) / binw)) - 1
    if config.start_hz + last * binw >= hi:
        last -= 1
    last = min(last, config.n_bins - 1)
    if last < first:
        return BandSpan(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    bins = np.arange(first, last + 1, dtype=np.int64)
    segs = np.unique(bins // config.bins_per_segment)
    return BandSpan(segs, bins)


def generate_scan_cycle(
    config: SpectrumConfig,
    scenario: Sequence[Transmission],
    cycle_index: int,
    seed: int,
    sensor_id: str = "sensor",
) -> ScanCycle:
    """Synthesize one benign sweep.

    Deterministic per (seed, sensor_id, cycle_index).  Noise is drawn in
    one fixed-shape block before transmissions are applied, so the value
    a bin would take in an empty scenario is preserved wherever no
    transmission lands.
    """
    shape = (config.n_segments, config.bins_per_segment)
    noise = rng_for(seed, "psd-noise", sensor_id, cycle_index).normal(
        0.0, config.noise_sigma_db, size=shape
    )
    psd = config.noise_floor_db + noise
    if scenario:
        act_rng = rng_for(seed, "tx-activity", sensor_id, cycle_index)
        flat = psd.reshape(-1)
        for tx in scenario:
            u = act_rng.uniform()
            if u >= tx.duty_cycle:
                continue
            span = segments_for_band(config, tx.center_hz, tx.bandwidth_hz)
            flat[span.bin_indices] += tx.power_db
        psd = flat.reshape(shape)
    np.clip(psd, config.noise_floor_db - 20.0, config.noise_floor_db + 120.0, out=psd)
    return ScanCycle(
        cycle_index=int(cycle_index),
        psd=psd,
        t_start=float(cycle_index) * config.cycle_duration_s,
        duration_s=config.cycle_duration_s,
    )


# ---------------------------------------------------------------------------
# scenario files


@dataclass
class Scenario:
    spectrum: SpectrumConfig
    transmissions: List[Transmission] = field(default_factory=list)
    attack_entries: List[dict] = field(default_factory=list)


_SPECTRUM_KEYS = {
    "start_hz",
    "end_hz",
    "segment_width_hz",
    "bins_per_segment",
    "cycle_duration_s",
    "noise_floor_db",
    "noise_sigma_db",
}


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario config.

    INI sections: one optional ``[spectrum]`` block of geometry keys, any
    number of ``[transmission NAME]`` blocks, any number of
    ``[attack NAME]`` blocks (returned raw for the attack layer).
    Unknown keys or malformed numbers raise ValueError naming the spot.
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"scenario parse error: {exc}") from exc

    spectrum_kwargs = {}
    transmissions: List[Transmission] = []
    attack_entries: List[dict] = []
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "spectrum":
            for key, raw in items.items():
                if key not in _SPECTRUM_KEYS:
                    raise ValueError(f"scenario [spectrum]: unknown key {key!r}")
                spectrum_kwargs[key] = _num(raw, f"[spectrum] {key}")
            if "bins_per_segment" in spectrum_kwargs:
                spectrum_kwargs["bins_per_segment"] = int(spectrum_kwargs["bins_per_segment"])
        elif section.startswith("transmission"):
            name = section.split(None, 1)[1] if " " in section else section
            try:
                transmissions.append(
                    Transmission(
                        name=name,
                        center_hz=_num(items["center_hz"], f"[{section}] center_hz"),
                        bandwidth_hz=_num(items["bandwidth_hz"], f"[{section}] bandwidth_hz"),
                        power_db=_num(items["power_db"], f"[{section}] power_db"),
                        duty_cycle=_num(items.get("duty_cycle", "1.0"), f"[{section}] duty_cycle"),
                    )
                )
            except KeyError as exc:
                raise ValueError(f"scenario [{section}]: missing key {exc.args[0]!r}") from exc
        elif section.startswith("attack"):
            entry = {"name": section.split(None, 1)[1] if " " in section else section}
            entry.update(items)
            attack_entries.append(entry)
        else:
            raise ValueError(f"scenario: unknown section [{section}]")
    return Scenario(
        spectrum=make_spectrum_config(**spectrum_kwargs),
        transmissions=transmissions,
        attack_entries=attack_entries,
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _num(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ValueError(f"scenario {where}: not a number: {raw!r}") from exc


# ---------------------------------------------------------------------------
# PSD dumps: one CSV row per segment, header carries frequencies in Hz.


def dump_psd_csv(cycle: ScanCycle, config: SpectrumConfig, path) -> None:
    """Write the cycle's PSD matrix.

    Header: ``segment_start_hz`` then the bin start offsets within a
    segment; each data row starts with the segment's absolute start
    frequency, so cell frequency = row start + column offset.
    """
    offsets = [int(round(b * config.bin_width_hz)) for b in range(config.bins_per_segment)]
    buf = io.StringIO()
    buf.write("segment_start_hz," + ",".join(f"+{o}" for o in offsets) + "\n")
    starts = config.start_hz + np.arange(cycle.psd.shape[0]) * config.segment_width_hz
    for s, row in zip(starts, cycle.psd):
        buf.write("%.17g," % s + ",".join("%.17g" % v for v in row) + "\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def load_psd_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read a PSD dump back: (psd matrix, segment start frequencies)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "segment_start_hz":
            raise ValueError(f"{path}: not a PSD dump (bad header)")
        starts = []
        rows = []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != len(header):
                raise ValueError(f"{path}: row width {len(parts)} != header {len(header)}")
            starts.append(float(parts[0]))
            rows.append([float(p) for p in parts[1:]])
    return np.asarray(rows, dtype=np.float64), np.asarray(starts, dtype=np.float64)
