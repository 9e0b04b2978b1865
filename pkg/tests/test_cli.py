"""Command line front end, exercised in process."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from specsentry import fingerprint as fp
from specsentry.attacks import attack_config_from_entry, expected_tally, resolve_attack
from specsentry.cli import main
from specsentry.collector import VectorStore
from specsentry.curation import CuratedDataset, VectorFrame
from specsentry.datasets import benign_frame
from specsentry.detectors import DETECTOR_KINDS, load_model
from specsentry.evaluation import MetricsReport
from specsentry.spectrum import load_scenario

TINY_SCENARIO = """
[spectrum]
start_hz = 100e6
end_hz = 100.16e6
segment_width_hz = 40e3
bins_per_segment = 4
cycle_duration_s = 50.0

[transmission beacon]
center_hz = 100.06e6
bandwidth_hz = 40e3
power_db = 30.0

[attack probe]
kind = mimic
attacked_center_hz = 100.1e6
attacked_bandwidth_hz = 40e3
source_center_hz = 100.02e6
source_bandwidth_hz = 40e3
"""


@pytest.fixture()
def scenario_path(tmp_path):
    p = tmp_path / "scenario.ini"
    p.write_text(TINY_SCENARIO)
    return str(p)


def _tree_bytes(root):
    out = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = p.read_bytes()
    return out


def _benign_frames(hours=2.0, seed=9):
    frames = {}
    for i, sid in enumerate(("rpi3-01", "rpi3-02")):
        prof = fp.build_device_profile(sid, "rpi3-like", seed + i)
        frames[sid] = benign_frame(prof, hours, seed + i)
    return frames


# ---------------------------------------------------------------------------
# simulate / attack


def test_simulate_writes_cycles_and_manifest(tmp_path, scenario_path, capsys):
    out = str(tmp_path / "sim")
    rc = main(["simulate", "--config", scenario_path, "--out", out,
               "--cycles", "3", "--seed", "4", "--sensor-id", "s-1"])
    assert rc == 0
    assert "simulate: wrote 3 cycles" in capsys.readouterr().out
    with open(os.path.join(out, "manifest.json")) as fh:
        manifest = json.load(fh)
    assert manifest["spectrum"]["n_segments"] == 4
    assert manifest["spectrum"]["n_bins"] == 16
    assert manifest["transmissions"][0]["name"] == "beacon"
    for rel in manifest["files"]:
        assert os.path.exists(os.path.join(out, rel))
    assert manifest["files"] == [f"psd/cycle-{i:06d}.csv" for i in (1, 2, 3)]


def test_simulate_reruns_are_byte_identical(tmp_path, scenario_path):
    args = ["simulate", "--config", scenario_path, "--cycles", "3", "--seed", "4"]
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(args + ["--out", a]) == 0
    assert main(args + ["--out", b]) == 0
    ta, tb = _tree_bytes(a), _tree_bytes(b)
    assert set(ta) == set(tb)
    assert all(ta[k] == tb[k] for k in ta)
    # a different seed changes the sweeps
    c = str(tmp_path / "c")
    assert main(["simulate", "--config", scenario_path, "--cycles", "3",
                 "--seed", "5", "--out", c]) == 0
    tc = _tree_bytes(c)
    assert tc["psd/cycle-000001.csv"] != ta["psd/cycle-000001.csv"]


def test_attack_outputs_tallies_and_vectors(tmp_path, scenario_path):
    out = str(tmp_path / "atk")
    rc = main(["attack", "--config", scenario_path, "--out", out,
               "--cycles", "6", "--seed", "2", "--sensor-id", "s-1"])
    assert rc == 0

    scenario = load_scenario(scenario_path)
    plan = resolve_attack(attack_config_from_entry(scenario.attack_entries[0]), scenario.spectrum)

    rows = Path(out, "tallies.csv").read_text().splitlines()
    assert rows[0] == "cycle,file_creates,psd_writes,psd_reads,rng_draws,substitutions"
    assert len(rows) == 7
    for line in rows[1:]:
        vals = [int(x) for x in line.split(",")]
        want = expected_tally(plan, vals[0])
        assert vals[1:] == [want.file_creates, want.psd_writes, want.psd_reads,
                            want.rng_draws, want.substitutions]

    vecs = [json.loads(l) for l in Path(out, "vectors.ndjson").read_text().splitlines()]
    assert len(vecs) == 6
    for doc in vecs:
        fp.validate_vector_doc(doc)
    assert [v["timestamp"] for v in vecs] == [i * 50.0 for i in range(1, 7)]

    for sub in ("benign", "attacked"):
        assert len(list(Path(out, sub).glob("cycle-*.csv"))) == 6
    # the attacked band really changed, cycle 2 onwards
    b = Path(out, "benign", "cycle-000002.csv").read_bytes()
    a = Path(out, "attacked", "cycle-000002.csv").read_bytes()
    assert a != b


def test_attack_requires_one_attack_section(tmp_path, scenario_path):
    benign_only = Path(scenario_path).read_text().split("[attack")[0]
    p = tmp_path / "benign.ini"
    p.write_text(benign_only)
    with pytest.raises(SystemExit, match="attack"):
        main(["attack", "--config", str(p), "--out", str(tmp_path / "x")])


# ---------------------------------------------------------------------------
# curate / train


def test_curate_from_csv_and_ndjson_agree(tmp_path):
    frames = _benign_frames()

    csv_dir = tmp_path / "frames"
    csv_dir.mkdir()
    for sid, f in frames.items():
        f.to_csv(str(csv_dir / f"{sid}.csv"))

    store_dir = tmp_path / "store"
    store = VectorStore(str(store_dir))
    for sid, f in frames.items():
        for i in range(f.matrix.shape[0]):
            store.append({
                "sensor_id": sid,
                "timestamp": float(f.timestamps[i]),
                "window_s": float(f.window_s),
                "counts": {n: int(v) for n, v in zip(f.feature_names, f.matrix[i])},
            })

    ds_a, ds_b = str(tmp_path / "ds-a"), str(tmp_path / "ds-b")
    assert main(["curate", "--input", str(csv_dir), "--out", ds_a]) == 0
    assert main(["curate", "--input", str(store_dir), "--out", ds_b]) == 0

    a, b = CuratedDataset.load(ds_a), CuratedDataset.load(ds_b)
    assert a.feature_names == b.feature_names
    assert np.array_equal(a.train, b.train)
    assert np.array_equal(a.val, b.val)
    assert np.array_equal(a.test, b.test)
    # 72/18/10 split of two 126-row devices
    assert a.train.shape[0] == 2 * 90
    assert a.val.shape[0] == 2 * 22
    assert a.test.shape[0] == 2 * 14


def test_curate_rejects_bad_config(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"ratios": [0.72, 0.18, 0.10], "gpu": 1}))
    with pytest.raises(SystemExit, match="unknown config keys"):
        main(["curate", "--input", str(tmp_path), "--config", str(conf),
              "--out", str(tmp_path / "ds")])
    with pytest.raises(SystemExit, match="--input"):
        main(["curate", "--out", str(tmp_path / "ds")])


@pytest.fixture(scope="module")
def curated_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    csv_dir = root / "frames"
    csv_dir.mkdir()
    for sid, f in _benign_frames().items():
        f.to_csv(str(csv_dir / f"{sid}.csv"))
    ds_dir = str(root / "ds")
    assert main(["curate", "--input", str(csv_dir), "--out", ds_dir]) == 0
    return ds_dir


def test_train_all_detectors(tmp_path, curated_dir):
    models = str(tmp_path / "models")
    rc = main(["train", "--input", curated_dir, "--out", models, "--seed", "1"])
    assert rc == 0
    ds = CuratedDataset.load(curated_dir)
    files = sorted(os.listdir(models))
    assert files == sorted(f"{k}.model.json" for k in DETECTOR_KINDS)
    for name in files:
        model = load_model(os.path.join(models, name))
        assert model.feature_names == ds.feature_names
        assert model.train_rows == ds.train.shape[0]
        assert model.train_seed == 1


def test_train_single_named_model_with_hyper(tmp_path, curated_dir):
    models = str(tmp_path / "models")
    conf = tmp_path / "hyper.json"
    conf.write_text(json.dumps({"lof": {"k": 5}}))
    rc = main(["train", "--input", curated_dir, "--out", models,
               "--detector", "lof", "--name", "global", "--config", str(conf)])
    assert rc == 0
    model = load_model(os.path.join(models, "global.model.json"))
    assert model.kind == "lof"
    assert int(model.params["k"]) == 5

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"svm": {}}))
    with pytest.raises(SystemExit, match="unknown detectors"):
        main(["train", "--input", curated_dir, "--out", models, "--config", str(bad)])


def test_train_missing_dataset_reports_error(tmp_path, capsys):
    rc = main(["train", "--input", str(tmp_path / "nope"), "--out", str(tmp_path / "m")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# evaluate / report


def test_evaluate_and_report_round_trip(tmp_path, capsys):
    conf = tmp_path / "exp.json"
    conf.write_text(json.dumps({
        "kind": "individual",
        "detectors": ["lof", "copod"],
        "benign_hours": 2.0,
        "attack_hours": 0.5,
        "attacks": ["noise", "freeze"],
        "bandwidths": [2e6],
        "layout": [["rpi3-like", 2]],
    }))
    out = str(tmp_path / "run")
    rc = main(["evaluate", "--config", str(conf), "--out", out, "--seed", "1"])
    assert rc == 0
    for name in ("report.json", "report.csv", "report.md", "experiment.json"):
        assert os.path.exists(os.path.join(out, name))
    with open(os.path.join(out, "report.json")) as fh:
        report = MetricsReport.from_json(json.load(fh))
    assert report.seed == 1  # --seed wins over the config default
    assert report.counts["models"] == 4
    assert "# individual experiment" in capsys.readouterr().out

    md = str(tmp_path / "render.md")
    rc = main(["report", "--input", os.path.join(out, "report.json"), "--out", md])
    assert rc == 0
    assert Path(md).read_text() == report.to_markdown()

    # --out may also name a directory, like every other subcommand
    rc = main(["report", "--input", os.path.join(out, "report.json"), "--out", out])
    assert rc == 0
    assert Path(out, "report.md").read_text() == report.to_markdown()


def test_evaluate_rejects_unknown_config_keys(tmp_path, capsys):
    conf = tmp_path / "exp.json"
    conf.write_text(json.dumps({"kind": "global", "gpu": True}))
    rc = main(["evaluate", "--config", str(conf)])
    assert rc == 2
    assert "unknown experiment spec keys" in capsys.readouterr().err


def test_report_requires_input():
    with pytest.raises(SystemExit, match="--input"):
        main(["report"])


# ---------------------------------------------------------------------------
# argument handling


def test_argparse_exit_codes(tmp_path):
    with pytest.raises(SystemExit) as ei:
        main([])
    assert ei.value.code == 2
    with pytest.raises(SystemExit) as ei:
        main(["simulate", "--wat"])
    assert ei.value.code == 2
    with pytest.raises(SystemExit, match="--out"):
        main(["simulate"])
