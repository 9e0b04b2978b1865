#!/usr/bin/env python3
"""Five unsupervised scorers, one training set, seven attacks.

Every detector trains on the same normalized benign rows and draws its
decision band from the interquartile range of its own training scores
(median +- 1.5 IQR, inclusive). A vector is anomalous when its score
leaves that band on either side.
"""

import numpy as np

from specsentry.curation import curate
from specsentry.datasets import (
    attack_frame,
    attack_plan_grid,
    build_fleet,
    fleet_benign_frames,
)
from specsentry.detectors import DETECTOR_KINDS, classify_matrix, train_detector

fleet = build_fleet(0, layout=(("rpi3-like", 3),), benign_hours=4.0)
frames = fleet_benign_frames(fleet, 4.0, 0)
ds = curate(frames)
print(f"training on {ds.train.shape[0]} rows x {ds.train.shape[1]} features")

models = {}
for kind in DETECTOR_KINDS:
    hyper = {"epochs": 60} if kind == "autoencoder" else None
    m = train_detector(kind, ds.train, ds.feature_names, ds.norm_min, ds.norm_max, seed=0, hyper=hyper)
    models[kind] = m
    extra = ""
    if kind == "autoencoder":
        extra = f"  loss {m.extras['loss_first_epoch']:.4f} -> {m.extras['loss_final']:.4f}"
    if kind == "ocsvm":
        extra = f"  kkt residual {m.extras['kkt_residual']:.2e}"
    print(f"  {kind:<12} band [{m.threshold_lo:9.4f}, {m.threshold_hi:9.4f}]{extra}")

# one obvious attack and one stealthy one, same device, same hour
plans = attack_plan_grid(kinds=("noise", "freeze"), bandwidths=(2e6,), seed=0)
profile = fleet["rpi3-01"]

print(f"\nflag fraction on one attacked hour of {profile.sensor_id} (2 MHz footprint):")
print(f"{'detector':<12} {'benign test':>11} {'noise':>8} {'freeze':>8}")
X_test = ds.test
for kind, m in models.items():
    cols = [f"{classify_matrix(m, X_test).mean():11.2f}"]
    for ak in ("noise", "freeze"):
        fr = attack_frame(profile, plans[(ak, 2e6)], 1.0, seed=0)
        X = m.normalize(fr.select(ds.feature_names).matrix)
        cols.append(f"{classify_matrix(m, X).mean():8.2f}")
    print(f"{kind:<12} {' '.join(cols)}")

print("\nnoise forges the spectrum every sweep; the multivariate scorers flag")
print("almost every window, while copod reads one marginal at a time and needs")
print("a louder footprint. freeze replays one stored recording, barely touches")
print("the kernel, and slips past all five: the blind spot demo 02 predicted.")
