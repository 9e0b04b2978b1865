"""Builders shared across test modules.

The tiny spectrum used by the transformer law tests is four segments of
four 10 kHz bins each, so a full trace is sixteen values per cycle and
every recording and substitution can be checked by eye.
"""

from typing import List, Optional, Tuple

import numpy as np

from specsentry.attacks import AttackConfig, AttackState, apply_attack, resolve_attack
from specsentry.spectrum import ScanCycle, SpectrumConfig, make_spectrum_config

TINY_START_HZ = 100e6
TINY_SEG_W_HZ = 40e3  # four 10 kHz bins


def tiny_config(n_segments: int = 4, bins_per_segment: int = 4) -> SpectrumConfig:
    return make_spectrum_config(
        start_hz=TINY_START_HZ,
        end_hz=TINY_START_HZ + n_segments * TINY_SEG_W_HZ,
        segment_width_hz=TINY_SEG_W_HZ,
        bins_per_segment=bins_per_segment,
    )


def segment_center(i: int, seg_w: float = TINY_SEG_W_HZ) -> float:
    return TINY_START_HZ + (i + 0.5) * seg_w


def patterned_trace(cfg: SpectrumConfig, n_cycles: int, seed: Optional[int] = None) -> List[ScanCycle]:
    """Cycles whose every bin value is unique across the whole trace.

    Value = 1000 * cycle number + flat bin index, plus an optional
    seeded jitter. Uniqueness makes substitution checks unambiguous:
    any copied value identifies exactly one origin.
    """
    rng = np.random.default_rng(seed) if seed is not None else None
    cycles = []
    for t in range(n_cycles):
        flat = (t + 1) * 1000.0 + np.arange(cfg.n_bins, dtype=np.float64)
        if rng is not None:
            flat = flat + rng.uniform(0.0, 0.25, size=cfg.n_bins)
        cycles.append(
            ScanCycle(
                cycle_index=t + 1,
                psd=flat.reshape(cfg.n_segments, cfg.bins_per_segment),
                t_start=t * cfg.cycle_duration_s,
                duration_s=cfg.cycle_duration_s,
            )
        )
    return cycles


def drive(plan, cycles, persist_dir: Optional[str] = None) -> Tuple[list, list, AttackState]:
    """Run an attack over a cycle list; collect flat outputs and tallies."""
    state = AttackState(persist_dir=persist_dir)
    outs, tallies = [], []
    for cycle in cycles:
        out, tally, state = apply_attack(plan, state, cycle)
        outs.append(out.psd.reshape(-1).copy())
        tallies.append(tally)
    return outs, tallies, state


def tiny_plan(
    cfg: SpectrumConfig,
    kind: str,
    attacked_seg: int = 2,
    source_seg: int = 0,
    noise_db: float = 6.0,
    delay_s: float = 100.0,
    seed: int = 11,
):
    """Resolve a one-segment-per-band attack inside the tiny spectrum."""
    needs_source = kind in ("repeat", "mimic", "spoof", "confusion")
    config = AttackConfig(
        kind=kind,
        attacked_center_hz=segment_center(attacked_seg),
        attacked_bandwidth_hz=TINY_SEG_W_HZ,
        source_center_hz=segment_center(source_seg) if needs_source else None,
        source_bandwidth_hz=TINY_SEG_W_HZ if needs_source else None,
        noise_intensity_db=noise_db if kind in ("noise", "spoof") else 0.0,
        delay_s=delay_s if kind == "delay" else 0.0,
        seed=seed,
    )
    return resolve_attack(config, cfg)


def flats(cycles) -> List[np.ndarray]:
    return [c.psd.reshape(-1).copy() for c in cycles]
