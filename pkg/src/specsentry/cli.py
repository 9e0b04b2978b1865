"""Command line front end.

Subcommands: simulate, attack, curate, train, evaluate, serve, report.
Every subcommand accepts --seed, --config, and --out; outputs are
deterministic for a fixed (config, seed) so reruns are byte-identical.
"""

import argparse
import glob
import json
import os
import sys
from typing import List, Optional

from specsentry.attacks import AttackState, apply_attack, attack_config_from_entry, resolve_attack
from specsentry.collector import DEFAULT_ALERT_AFTER, serve as build_server
from specsentry.curation import CuratedDataset, VectorFrame, curate
from specsentry.detectors import DETECTOR_KINDS, save_model, train_detector
from specsentry.evaluation import ExperimentSpec, MetricsReport, run_experiment
from specsentry.fingerprint import build_device_profile, synthesize_behavior_vector
from specsentry.spectrum import Scenario, dump_psd_csv, generate_scan_cycle, load_scenario, make_spectrum_config


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="base random seed")
    p.add_argument("--config", default=None, help="config file for this subcommand")
    p.add_argument("--out", default=None, help="output file or directory")


def _load_scenario(path: Optional[str]) -> Scenario:
    if path is None:
        return Scenario(spectrum=make_spectrum_config())
    return load_scenario(path)


def _require_out(args, kind: str) -> str:
    if not args.out:
        raise SystemExit(f"{kind}: --out is required")
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    out = _require_out(args, "simulate")
    scenario = _load_scenario(args.config)
    cfg = scenario.spectrum
    os.makedirs(os.path.join(out, "psd"), exist_ok=True)
    files = []
    for idx in range(1, args.cycles + 1):
        cycle = generate_scan_cycle(cfg, scenario.transmissions, idx, args.seed, args.sensor_id)
        rel = os.path.join("psd", f"cycle-{idx:06d}.csv")
        dump_psd_csv(cycle, cfg, os.path.join(out, rel))
        files.append(rel)
    manifest = {
        "kind": "simulate",
        "seed": args.seed,
        "sensor_id": args.sensor_id,
        "cycles": args.cycles,
        "spectrum": {
            "start_hz": cfg.start_hz,
            "end_hz": cfg.end_hz,
            "segment_width_hz": cfg.segment_width_hz,
            "bins_per_segment": cfg.bins_per_segment,
            "n_segments": cfg.n_segments,
            "n_bins": cfg.n_bins,
            "cycle_duration_s": cfg.cycle_duration_s,
        },
        "transmissions": [
            {
                "name": t.name,
                "center_hz": t.center_hz,
                "bandwidth_hz": t.bandwidth_hz,
                "power_db": t.power_db,
                "duty_cycle": t.duty_cycle,
            }
            for t in scenario.transmissions
        ],
        "files": files,
    }
    _write_json(os.path.join(out, "manifest.json"), manifest)
    print(f"simulate: wrote {len(files)} cycles to {out}")
    return 0


def cmd_attack(args) -> int:
    out = _require_out(args, "attack")
    if args.config is None:
        raise SystemExit("attack: --config scenario with an [attack NAME] section is required")
    scenario = load_scenario(args.config)
    if len(scenario.attack_entries) != 1:
        raise SystemExit(
            f"attack: scenario must define exactly one [attack] section, found {len(scenario.attack_entries)}"
        )
    cfg = scenario.spectrum
    plan = resolve_attack(attack_config_from_entry(scenario.attack_entries[0]), cfg)
    for sub in ("benign", "attacked"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)

    profile = build_device_profile(args.sensor_id, "rpi3-like", seed=args.seed)
    state = AttackState()
    tally_rows = []
    files = []
    with open(os.path.join(out, "vectors.ndjson"), "w", encoding="utf-8") as vfh:
        for idx in range(1, args.cycles + 1):
            benign = generate_scan_cycle(cfg, scenario.transmissions, idx, args.seed, args.sensor_id)
            attacked, tally, state = apply_attack(plan, state, benign)
            b_rel = os.path.join("benign", f"cycle-{idx:06d}.csv")
            a_rel = os.path.join("attacked", f"cycle-{idx:06d}.csv")
            dump_psd_csv(benign, cfg, os.path.join(out, b_rel))
            dump_psd_csv(attacked, cfg, os.path.join(out, a_rel))
            files.extend([b_rel, a_rel])
            tally_rows.append((idx, tally))
            vec = synthesize_behavior_vector(
                profile, tally, seed=args.seed, timestamp=benign.t_start
            )
            vfh.write(vec.to_json() + "\n")

    with open(os.path.join(out, "tallies.csv"), "w", encoding="utf-8") as fh:
        fh.write("cycle,file_creates,psd_writes,psd_reads,rng_draws,substitutions\n")
        for idx, tally in tally_rows:
            fh.write(
                f"{idx},{tally.file_creates},{tally.psd_writes},"
                f"{tally.psd_reads},{tally.rng_draws},{tally.substitutions}\n"
            )
    manifest = {
        "kind": "attack",
        "seed": args.seed,
        "sensor_id": args.sensor_id,
        "cycles": args.cycles,
        "attack": scenario.attack_entries[0],
        "files": files + ["tallies.csv", "vectors.ndjson"],
    }
    _write_json(os.path.join(out, "manifest.json"), manifest)
    print(f"attack: {plan.kind} over {args.cycles} cycles, wrote {out}")
    return 0


def _frames_from_input(path: str) -> dict:
    """Vector frames from a directory of frame CSVs or an NDJSON store."""
    if not os.path.isdir(path):
        raise SystemExit(f"curate: input directory not found: {path}")
    ndjson = sorted(glob.glob(os.path.join(path, "*.ndjson")))
    if ndjson:
        from specsentry.collector import VectorStore

        return VectorStore(path).frames()
    csvs = sorted(glob.glob(os.path.join(path, "*.csv")))
    if not csvs:
        raise SystemExit(f"curate: no *.csv or *.ndjson under {path}")
    frames = {}
    for p in csvs:
        f = VectorFrame.from_csv(p)
        frames[f.sensor_id] = f
    return frames


def cmd_curate(args) -> int:
    out = _require_out(args, "curate")
    if not args.input:
        raise SystemExit("curate: --input directory is required")
    ratios = (0.72, 0.18, 0.10)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            conf = json.load(fh)
        unknown = set(conf) - {"ratios"}
        if unknown:
            raise SystemExit(f"curate: unknown config keys {sorted(unknown)}")
        if "ratios" in conf:
            ratios = tuple(float(r) for r in conf["ratios"])
    frames = _frames_from_input(args.input)
    ds = curate(frames, ratios=ratios)
    ds.save(out)
    print(
        f"curate: {len(frames)} devices, kept {len(ds.feature_names)} features, "
        f"train/val/test = {ds.train.shape[0]}/{ds.val.shape[0]}/{ds.test.shape[0]} -> {out}"
    )
    return 0


def cmd_train(args) -> int:
    out = _require_out(args, "train")
    if not args.input:
        raise SystemExit("train: --input dataset directory is required")
    ds = CuratedDataset.load(args.input)
    hyper = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            hyper = json.load(fh)
        unknown = set(hyper) - set(DETECTOR_KINDS)
        if unknown:
            raise SystemExit(f"train: unknown detectors in config {sorted(unknown)}")
    kinds = list(DETECTOR_KINDS) if args.detector == "all" else [args.detector]
    for kind in kinds:
        model = train_detector(
            kind, ds.train, ds.feature_names, ds.norm_min, ds.norm_max,
            seed=args.seed, hyper=hyper.get(kind),
        )
        name = args.name if (args.name and len(kinds) == 1) else kind
        path = os.path.join(out, f"{name}.model.json")
        save_model(model, path)
        print(
            f"train: {kind} on {model.train_rows} rows, "
            f"thresholds ({model.threshold_lo:.6g}, {model.threshold_hi:.6g}) -> {path}"
        )
    return 0


def cmd_evaluate(args) -> int:
    spec = ExperimentSpec()
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            spec = ExperimentSpec.from_json(json.load(fh))
    if args.seed_given:
        spec.seed = args.seed
    report = run_experiment(spec)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        report.write_json(os.path.join(args.out, "report.json"))
        report.write_csv(os.path.join(args.out, "report.csv"))
        with open(os.path.join(args.out, "report.md"), "w", encoding="utf-8") as fh:
            fh.write(report.to_markdown())
        _write_json(os.path.join(args.out, "experiment.json"), spec.to_json())
    print(report.to_markdown())
    return 0


def cmd_serve(args) -> int:
    conf = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            conf = json.load(fh)
        unknown = set(conf) - {"host", "port", "storage", "models", "alert_after"}
        if unknown:
            raise SystemExit(f"serve: unknown config keys {sorted(unknown)}")
    host = args.host or conf.get("host", "127.0.0.1")
    port = args.port if args.port is not None else int(conf.get("port", 8732))
    storage = args.storage or conf.get("storage") or args.out
    models = args.models or conf.get("models")
    alert_after = args.alert_after if args.alert_after is not None else int(
        conf.get("alert_after", DEFAULT_ALERT_AFTER)
    )
    server = build_server(
        host=host, port=port, storage_root=storage, models_dir=models, alert_after=alert_after
    )
    host, port = server.server_address[:2]
    print(f"collector listening on http://{host}:{port} (storage {server.session.store.root})")
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_report(args) -> int:
    if not args.input:
        raise SystemExit("report: --input report.json is required")
    with open(args.input, "r", encoding="utf-8") as fh:
        report = MetricsReport.from_json(json.load(fh))
    text = report.to_markdown()
    if args.out:
        path = args.out
        if os.path.isdir(path) or path.endswith(os.sep):
            os.makedirs(path, exist_ok=True)
            path = os.path.join(path, "report.md")
        else:
            out_dir = os.path.dirname(path)
            if out_dir:
                os.makedirs(out_dir, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"report: wrote {path}")
    else:
        print(text)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="specsentry",
        description="Spectrum-sensor falsification: simulation, fingerprints, detection.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize benign scan cycles from a scenario")
    _add_common(p)
    p.add_argument("--cycles", type=int, default=3)
    p.add_argument("--sensor-id", default="sensor-01")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="run one falsification attack over a simulated stream")
    _add_common(p)
    p.add_argument("--cycles", type=int, default=5)
    p.add_argument("--sensor-id", default="sensor-01")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("curate", help="build a curated dataset from vector frames")
    _add_common(p)
    p.add_argument("--input", default=None, help="directory of frame CSVs or an NDJSON store")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("train", help="train detectors on a curated dataset")
    _add_common(p)
    p.add_argument("--input", default=None, help="curated dataset directory")
    p.add_argument("--detector", default="all", choices=list(DETECTOR_KINDS) + ["all"])
    p.add_argument("--name", default=None, help="output model name (single detector only)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run an experiment harness and write reports")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the vector collector service")
    _add_common(p)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--storage", default=None, help="NDJSON storage root")
    p.add_argument("--models", default=None, help="directory of *.model.json files")
    p.add_argument("--alert-after", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="render a saved report.json to markdown")
    _add_common(p)
    p.add_argument("--input", default=None, help="path to report.json")
    p.set_defaults(func=cmd_report)

    return ap


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    args.seed_given = "--seed" in argv
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
