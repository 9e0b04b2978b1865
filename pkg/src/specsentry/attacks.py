"""Sensing-data falsification attacks as scan-stream transformers.

Seven attack kinds rewrite selected bins of each scan cycle while
counting the operations they perform (file creates, PSD writes/reads,
RNG draws, substitutions).  Those tallies are what couples an attack to
the sensor's kernel-event fingerprint; the PSD itself only matters to
whoever consumes the falsified scans.

All transformers honour sweep order (segments are visited in ascending
frequency), never touch bins outside the attacked band, and are
deterministic for a given config seed.

  repeat     replay the source block recorded on the first cycle
  mimic      mirror the source band, lag 0/1 depending on sweep order
  confusion  swap two equal-width bands every cycle after a priming pass
  noise      add per-bin uniform noise in [0, intensity] dB
  spoof      mimic, but record source + uniform noise
  freeze     replay the attacked band's own first-cycle values
  delay      emit each attacked block delay_cycles sweeps late (FIFO)
"""

import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from specsentry._rand import rng_for
from specsentry.spectrum import BandSpan, ScanCycle, SpectrumConfig, segments_for_band

ATTACK_KINDS = ("repeat", "mimic", "confusion", "noise", "spoof", "freeze", "delay")

OP_NAMES = ("file_creates", "psd_writes", "psd_reads", "rng_draws", "substitutions")


@dataclass
class OpTally:
    """Operation counts emitted by one attack step."""

    file_creates: int = 0
    psd_writes: int = 0
    psd_reads: int = 0
    rng_draws: int = 0
    substitutions: int = 0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, op) for op in OP_NAMES], dtype=np.float64)

    def __add__(self, other: "OpTally") -> "OpTally":
        return OpTally(*[getattr(self, op) + getattr(other, op) for op in OP_NAMES])

    @staticmethod
    def zero() -> "OpTally":
        return OpTally()


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    attacked_center_hz: float
    attacked_bandwidth_hz: float
    source_center_hz: Optional[float] = None
    source_bandwidth_hz: Optional[float] = None
    noise_intensity_db: float = 0.0
    delay_s: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class AttackPlan:
    """AttackConfig resolved against a spectrum geometry."""

    kind: str
    attacked: BandSpan
    source: Optional[BandSpan]
    source_first: bool
    noise_intensity_db: float
    delay_cycles: int
    seed: int

    @property
    def touched_bins(self) -> np.ndarray:
        """Indices of every bin the attack may overwrite.

        Only the confusion attack writes into its source band (the two
        bands swap); all other kinds leave the source untouched.
        """
        if self.kind == "confusion" and self.source is not None:
            return np.concatenate([self.attacked.bin_indices, self.source.bin_indices])
        return self.attacked.bin_indices


@dataclass
class AttackState:
    """Mutable attack memory carried between cycles.

    ``stored`` maps a store name ("source", "attacked", "x", "y") to the
    latest recorded block; ``fifo`` queues blocks for the delay attack.
    When ``persist_dir`` is set every store is mirrored to a real file
    and substitutions read the values back from disk.
    """

    cycles_seen: int = 0
    stored: Dict[str, np.ndarray] = field(default_factory=dict)
    fifo: List[np.ndarray] = field(default_factory=list)
    persist_dir: Optional[str] = None

    def stored_psd(self, plan: AttackPlan) -> Dict[int, List[float]]:
        """Per-bin view of everything currently recorded."""
        out: Dict[int, List[float]] = {}
        if plan.kind == "delay":
            for block in self.fifo:
                for b, v in zip(plan.attacked.bin_indices, block):
                    out.setdefault(int(b), []).append(float(v))
            return out
        name_bins = {
            "source": plan.source.bin_indices if plan.source is not None else None,
            "attacked": plan.attacked.bin_indices,
            "x": plan.attacked.bin_indices,
            "y": plan.source.bin_indices if plan.source is not None else None,
        }
        for name, block in self.stored.items():
            bins = name_bins.get(name)
            if bins is None:
                continue
            for b, v in zip(bins, block):
                out.setdefault(int(b), []).append(float(v))
        return out

    def copy(self) -> "AttackState":
        return AttackState(
            cycles_seen=self.cycles_seen,
            stored={k: v.copy() for k, v in self.stored.items()},
            fifo=[b.copy() for b in self.fifo],
            persist_dir=self.persist_dir,
        )


def resolve_attack(config: AttackConfig, spectrum: SpectrumConfig) -> AttackPlan:
    """Validate a config against the spectrum geometry and fix bin spans."""
    kind = config.kind
    if kind not in ATTACK_KINDS:
        raise ValueError(f"unknown attack kind {kind!r}")
    attacked = segments_for_band(spectrum, config.attacked_center_hz, config.attacked_bandwidth_hz)
    if attacked.n_bins == 0:
        raise ValueError(f"{kind}: attacked band covers no bins")

    needs_source = kind in ("repeat", "mimic", "spoof", "confusion")
    source = None
    source_first = False
    if needs_source:
        if config.source_center_hz is None or config.source_bandwidth_hz is None:
            raise ValueError(f"{kind}: source band required")
        source = segments_for_band(spectrum, config.source_center_hz, config.source_bandwidth_hz)
        if source.n_bins == 0:
            raise ValueError(f"{kind}: source band covers no bins")
        s_set = source.bin_indices
        a_set = attacked.bin_indices
        if s_set[-1] >= a_set[0] and a_set[-1] >= s_set[0]:
            raise ValueError(f"{kind}: source and attacked bands must not overlap")
        if kind in ("mimic", "spoof", "confusion") and source.n_bins != attacked.n_bins:
            raise ValueError(
                f"{kind}: source and attacked bands must cover the same number of bins "
                f"({source.n_bins} != {attacked.n_bins})"
            )
        source_first = bool(s_set[0] < a_set[0])

    if kind in ("noise", "spoof") and not config.noise_intensity_db > 0:
        raise ValueError(f"{kind}: noise_intensity_db must be positive")

    delay_cycles = 0
    if kind == "delay":
        if not config.delay_s > 0:
            raise ValueError("delay: delay_s must be positive")
        delay_cycles = int(math.ceil(config.delay_s / spectrum.cycle_duration_s))

    return AttackPlan(
        kind=kind,
        attacked=attacked,
        source=source,
        source_first=source_first,
        noise_intensity_db=float(config.noise_intensity_db),
        delay_cycles=delay_cycles,
        seed=int(config.seed),
    )


def attack_config_from_entry(entry: dict) -> AttackConfig:
    """Build an AttackConfig from a parsed scenario [attack NAME] section."""
    def num(key, default=None):
        raw = entry.get(key, default)
        if raw is None:
            return None
        try:
            return float(raw)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"attack entry {entry.get('name')!r}: bad {key}: {raw!r}") from exc

    kind = entry.get("kind")
    if kind not in ATTACK_KINDS:
        raise ValueError(f"attack entry {entry.get('name')!r}: unknown kind {kind!r}")
    center = num("attacked_center_hz")
    width = num("attacked_bandwidth_hz")
    if center is None or width is None:
        raise ValueError(f"attack entry {entry.get('name')!r}: attacked band required")
    return AttackConfig(
        kind=kind,
        attacked_center_hz=center,
        attacked_bandwidth_hz=width,
        source_center_hz=num("source_center_hz"),
        source_bandwidth_hz=num("source_bandwidth_hz"),
        noise_intensity_db=num("noise_intensity_db", 0.0),
        delay_s=num("delay_s", 0.0),
        seed=int(float(entry.get("seed", 0))),
    )


# ---------------------------------------------------------------------------
# persistence shadow ("File" stores as real files)


def _persist_write(state: AttackState, name: str, values: np.ndarray) -> None:
    if state.persist_dir is None:
        return
    os.makedirs(state.persist_dir, exist_ok=True)
    with open(os.path.join(state.persist_dir, f"{name}.psd"), "w", encoding="utf-8") as fh:
        fh.write("\n".join("%.17g" % v for v in values))
        fh.write("\n")


def _persist_read(state: AttackState, name: str, fallback: np.ndarray) -> np.ndarray:
    if state.persist_dir is None:
        return fallback
    path = os.path.join(state.persist_dir, f"{name}.psd")
    with open(path, "r", encoding="utf-8") as fh:
        vals = np.array([float(line) for line in fh if line.strip()], dtype=np.float64)
    return vals


def _persist_fifo(state: AttackState) -> None:
    if state.persist_dir is None or not state.fifo:
        return
    _persist_write(state, "fifo", np.concatenate(state.fifo))


# ---------------------------------------------------------------------------
# the transformer engine


def apply_attack(
    plan: AttackPlan, state: AttackState, cycle: ScanCycle
) -> Tuple[ScanCycle, OpTally, AttackState]:
    """Run one attack step over a scan cycle.

    Returns the falsified cycle (fresh PSD copy; the input is never
    mutated), the operation tally for the step, and the advanced state.
    """
    st = state.copy()
    t = st.cycles_seen + 1  # 1-based index of the cycle being processed
    flat = cycle.psd.reshape(-1).copy()
    tally = OpTally()
    a_bins = plan.attacked.bin_indices

    if plan.kind == "repeat":
        _step_repeat(plan, st, flat, t, tally)
    elif plan.kind == "mimic":
        _step_mimic(plan, st, flat, t, tally, spoof=False)
    elif plan.kind == "spoof":
        _step_mimic(plan, st, flat, t, tally, spoof=True)
    elif plan.kind == "confusion":
        _step_confusion(plan, st, flat, t, tally)
    elif plan.kind == "noise":
        u = rng_for(plan.seed, "attack-noise", "noise", t).uniform(
            0.0, plan.noise_intensity_db, size=a_bins.size
        )
        tally.rng_draws += a_bins.size
        flat[a_bins] = flat[a_bins] + u
        tally.substitutions += a_bins.size
    elif plan.kind == "freeze":
        if t == 1:
            st.stored["attacked"] = flat[a_bins].copy()
            _persist_write(st, "attacked", st.stored["attacked"])
            tally.file_creates += 1
            tally.psd_writes += a_bins.size
        else:
            vals = _persist_read(st, "attacked", st.stored["attacked"])
            tally.psd_reads += a_bins.size
            flat[a_bins] = vals
            tally.substitutions += a_bins.size
    elif plan.kind == "delay":
        if t == 1:
            tally.file_creates += plan.attacked.n_segments
        st.fifo.append(flat[a_bins].copy())
        tally.psd_writes += a_bins.size
        if t > plan.delay_cycles:
            oldest = st.fifo.pop(0)
            tally.psd_reads += a_bins.size
            flat[a_bins] = oldest
            tally.substitutions += a_bins.size
        _persist_fifo(st)

    st.cycles_seen = t
    out = ScanCycle(
        cycle_index=cycle.cycle_index,
        psd=flat.reshape(cycle.psd.shape),
        t_start=cycle.t_start,
        duration_s=cycle.duration_s,
    )
    return out, tally, st


def _step_repeat(plan, st, flat, t, tally):
    a_bins = plan.attacked.bin_indices
    s_bins = plan.source.bin_indices
    if t == 1:
        st.stored["source"] = flat[s_bins].copy()
        _persist_write(st, "source", st.stored["source"])
        tally.file_creates += 1
        tally.psd_writes += s_bins.size
        if not plan.source_first:
            return  # attacked band already swept when the block was recorded
    block = _persist_read(st, "source", st.stored["source"])
    tally.psd_reads += a_bins.size
    reps = -(-a_bins.size // block.size)  # tile the block across a wider target
    flat[a_bins] = np.tile(block, reps)[: a_bins.size]
    tally.substitutions += a_bins.size


def _step_mimic(plan, st, flat, t, tally, spoof: bool):
    a_bins = plan.attacked.bin_indices
    s_bins = plan.source.bin_indices

    def record():
        vals = flat[s_bins].copy()
        if spoof:
            u = rng_for(plan.seed, "attack-noise", "spoof", t).uniform(
                0.0, plan.noise_intensity_db, size=s_bins.size
            )
            tally.rng_draws += s_bins.size
            vals = vals + u
        st.stored["source"] = vals
        _persist_write(st, "source", vals)
        tally.psd_writes += s_bins.size

    def substitute():
        vals = _persist_read(st, "source", st.stored["source"])
        tally.psd_reads += a_bins.size
        flat[a_bins] = vals
        tally.substitutions += a_bins.size

    if t == 1:
        tally.file_creates += plan.source.n_segments
    if plan.source_first:
        record()          # lag 0: same-cycle recording feeds the attacked band
        substitute()
    else:
        if t > 1:
            substitute()  # lag 1: last cycle's recording
        record()


def _step_confusion(plan, st, flat, t, tally):
    # attacked = X, source = Y; sweep handles whichever band starts lower first
    x_bins = plan.attacked.bin_indices
    y_bins = plan.source.bin_indices
    order = [("x", x_bins), ("y", y_bins)]
    if y_bins[0] < x_bins[0]:
        order.reverse()
    if t == 1:
        tally.file_creates += 2
        for name, bins in order:
            st.stored[name] = flat[bins].copy()
            _persist_write(st, name, st.stored[name])
            tally.psd_writes += bins.size
        return  # priming pass: record both bands, substitute nothing
    other = {"x": "y", "y": "x"}
    for name, bins in order:
        cur = flat[bins].copy()
        swap = _persist_read(st, other[name], st.stored[other[name]])
        tally.psd_reads += bins.size
        st.stored[name] = cur
        _persist_write(st, name, cur)
        tally.psd_writes += bins.size
        flat[bins] = swap
        tally.substitutions += bins.size


# spec'd step-function signatures, one per kind ------------------------------


def _make_step(kind):
    def step(state: AttackState, config: AttackConfig, spectrum: SpectrumConfig, cycle: ScanCycle):
        if config.kind != kind:
            raise ValueError(f"config kind {config.kind!r} does not match {kind}_step")
        plan = resolve_attack(config, spectrum)
        out, tally, st = apply_attack(plan, state, cycle)
        return out, tally, st

    step.__name__ = f"{kind}_step"
    step.__doc__ = f"One {kind} attack step: (state, config, spectrum, cycle) -> (cycle', tally, state')."
    return step


repeat_step = _make_step("repeat")
mimic_step = _make_step("mimic")
confusion_step = _make_step("confusion")
noise_step = _make_step("noise")
spoof_step = _make_step("spoof")
freeze_step = _make_step("freeze")
delay_step = _make_step("delay")


# ---------------------------------------------------------------------------
# analytic per-cycle tallies


def expected_tally(plan: AttackPlan, cycle_index: int) -> OpTally:
    """The tally an attack emits at a given 1-based cycle, computed from
    the flow alone (no PSD involved).

    This is the fast path for fleet-scale dataset synthesis; tests pin it
    against the tallies the actual transformers emit.
    """
    t = int(cycle_index)
    if t < 1:
        raise ValueError("cycle_index is 1-based")
    A = plan.attacked.n_bins
    S = plan.source.n_bins if plan.source is not None else 0
    k = plan.kind
    out = OpTally()
    if k == "repeat":
        if t == 1:
            out.file_creates = 1
            out.psd_writes = S
            if plan.source_first:
                out.psd_reads = A
                out.substitutions = A
        else:
            out.psd_reads = A
            out.substitutions = A
    elif k == "mimic" or k == "spoof":
        if t == 1:
            out.file_creates = plan.source.n_segments
        out.psd_writes = S
        if k == "spoof":
            out.rng_draws = S
        if plan.source_first or t > 1:
            out.psd_reads = A
            out.substitutions = A
    elif k == "confusion":
        if t == 1:
            out.file_creates = 2
            out.psd_writes = A + S
        else:
            out.psd_writes = A + S
            out.psd_reads = A + S
            out.substitutions = A + S
    elif k == "noise":
        out.rng_draws = A
        out.substitutions = A
    elif k == "freeze":
        if t == 1:
            out.file_creates = 1
            out.psd_writes = A
        else:
            out.psd_reads = A
            out.substitutions = A
    elif k == "delay":
        if t == 1:
            out.file_creates = plan.attacked.n_segments
        out.psd_writes = A
        if t > plan.delay_cycles:
            out.psd_reads = A
            out.substitutions = A
    return out


def tally_matrix(plan: AttackPlan, n_cycles: int) -> np.ndarray:
    """Stacked expected tallies for cycles 1..n (rows ordered as OP_NAMES)."""
    return np.stack([expected_tally(plan, t).as_array() for t in range(1, n_cycles + 1)])


def run_attack(
    plan: AttackPlan,
    cycles,
    persist_dir: Optional[str] = None,
):
    """Drive a cycle stream through an attack; yields (benign, attacked, tally)."""
    state = AttackState(persist_dir=persist_dir)
    for cycle in cycles:
        out, tally, state = apply_attack(plan, state, cycle)
        yield cycle, out, tally
