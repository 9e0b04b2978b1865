#!/usr/bin/env python3
"""Run each falsification attack over the same benign trace.

Every attack is a stateful transformer on the sweep stream. Besides the
changed PSD values it emits a per-cycle operation tally (file creates,
stored-PSD reads/writes, RNG draws, substitutions); those counts are
what the behavioral fingerprint sees later. Repeat and freeze go quiet
after their first recording, which is exactly why they are the hard
pair to catch.
"""

import numpy as np

from specsentry.attacks import ATTACK_KINDS, AttackConfig, AttackState, apply_attack, resolve_attack
from specsentry.spectrum import generate_scan_cycle, make_spectrum_config

cfg = make_spectrum_config()
attacked_hz, source_hz, width = 800.8e6, 600.8e6, 2e6

print("attack      cycle-1 tally (fc,w,r,rng,sub)   steady tally        changed bins")
for kind in ATTACK_KINDS:
    needs_source = kind in ("repeat", "mimic", "spoof", "confusion")
    plan = resolve_attack(
        AttackConfig(
            kind=kind,
            attacked_center_hz=attacked_hz,
            attacked_bandwidth_hz=width,
            source_center_hz=source_hz if needs_source else None,
            source_bandwidth_hz=width if needs_source else None,
            noise_intensity_db=10.0 if kind in ("noise", "spoof") else 0.0,
            delay_s=300.0 if kind == "delay" else 0.0,
            seed=7,
        ),
        cfg,
    )
    state = AttackState()
    tallies, changed = [], 0
    for t in range(1, 9):
        benign = generate_scan_cycle(cfg, [], t, seed=0, sensor_id="demo-1")
        out, tally, state = apply_attack(plan, state, benign)
        tallies.append(tally)
        changed = int((out.psd != benign.psd).sum())
    first, steady = tallies[0], tallies[-1]

    def row(t):
        return f"({t.file_creates},{t.psd_writes},{t.psd_reads},{t.rng_draws},{t.substitutions})"

    print(f"{kind:<10}  {row(first):<28} {row(steady):<18} {changed}")

print("\nrepeat/freeze steady state does no writes and draws no randomness;")
print("their only trace is reading the stored recording back every sweep.")

# the mimic pairing, shown on actual values
plan = resolve_attack(
    AttackConfig(kind="mimic", attacked_center_hz=attacked_hz, attacked_bandwidth_hz=width,
                 source_center_hz=source_hz, source_bandwidth_hz=width),
    cfg,
)
state = AttackState()
b2 = None
for t in (1, 2):
    benign = generate_scan_cycle(cfg, [], t, seed=0, sensor_id="demo-1")
    out, _, state = apply_attack(plan, state, benign)
    b2 = (benign, out)
benign, out = b2
a = plan.attacked.bin_indices
s = plan.source.bin_indices
print(f"\nmimic, cycle 2: attacked band now equals the source band scanned "
      f"the same sweep: {np.array_equal(out.psd.reshape(-1)[a], benign.psd.reshape(-1)[s])}")
