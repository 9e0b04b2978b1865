#!/usr/bin/env python3
"""One pooled model for the whole fleet, graded against every attack.

The global experiment trains each detector once on the combined benign
streams of all devices, then replays every configured attack on every
device and reports true-positive rate per (attack, bandwidth) cell plus
true-negative rate on the untouched benign tail.

This run is scaled down (4 devices, short streams, 3 bandwidths) so it
finishes in about a minute; the full fleet uses 9 devices, 7 attacks and
6 bandwidths from 20 kHz to 160 MHz.
"""

import time

from specsentry.evaluation import ExperimentSpec, run_experiment

spec = ExperimentSpec(
    kind="global",
    detectors=("lof", "copod"),
    benign_hours=3.0,
    attack_hours=1.0,
    seed=0,
    attacks=("noise", "mimic", "delay", "freeze"),
    bandwidths=(20e3, 2e6, 160e6),
    layout=(("rpi3-like", 3), ("rpi4-like", 1)),
)

t0 = time.perf_counter()
report = run_experiment(spec)
took = time.perf_counter() - t0

print(report.to_markdown())
per_vec = ", ".join(
    f"{det} {1e3 * s:.2f} ms/vector"
    for det, s in sorted(report.scoring_seconds_per_vector.items())
)
print(f"({report.counts['models']} models, {report.counts['devices']} devices, "
      f"{took:.1f} s; scoring {per_vec})")
