"""specsentry: behavioral fingerprinting for crowdsensed spectrum sensors.

The library models a fleet of PSD-scanning spectrum sensors, injects
sensing-data-falsification attacks into their scan streams, turns the
operations those attacks perform into kernel-event behavior vectors,
curates the vectors into train/validation/test datasets, and scores them
with five unsupervised anomaly detectors thresholded by the interquartile
rule.  A small collector service ingests vectors over HTTP and replays
its append-only log into identical datasets.
"""

from specsentry.spectrum import (
    SpectrumConfig,
    Transmission,
    ScanCycle,
    make_spectrum_config,
    segments_for_band,
    generate_scan_cycle,
)
from specsentry.attacks import AttackConfig, AttackState, OpTally, resolve_attack, apply_attack
from specsentry.fingerprint import (
    EVENT_CATALOG,
    CatalogEvent,
    DeviceProfile,
    BehaviorVector,
    event_catalog,
    selected_event_names,
    synthesize_behavior_vector,
    parse_perf_stat,
)

__version__ = "0.1.0"

__all__ = [
    "SpectrumConfig",
    "Transmission",
    "ScanCycle",
    "make_spectrum_config",
    "segments_for_band",
    "generate_scan_cycle",
    "AttackConfig",
    "AttackState",
    "OpTally",
    "resolve_attack",
    "apply_attack",
    "EVENT_CATALOG",
    "CatalogEvent",
    "DeviceProfile",
    "BehaviorVector",
    "event_catalog",
    "selected_event_names",
    "synthesize_behavior_vector",
    "parse_perf_stat",
    "__version__",
]
