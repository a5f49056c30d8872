"""End-to-end runs of the command-line front end (in-process via main())."""

import csv
import json
import os
import sys

import pytest

from sspatch.cli import main
from sspatch.grid import Genome, GenomeMeta, ShapeMatrix, load_genome, save_genome

from conftest import LINE_SERVER


@pytest.fixture(scope="module")
def genome_file(tmp_path_factory):
    g = Genome(
        ShapeMatrix((0, 1, 0, 1, 1, 1, 0, 1, 0)),
        ((0.2, 0.3), (0.7, 0.6)),
        l=0.2,
        pixel_value=0.2,
    )
    path = tmp_path_factory.mktemp("genomes") / "plus.json"
    save_genome(path, g, GenomeMeta(seed=0, lam=0.0, fitness=None, detector_id="toy"))
    return str(path)


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


# --- synth ------------------------------------------------------------------------------


def test_synth_writes_a_reproducible_dataset(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--count", "5", "--seed", "2", "--out-dir", str(a)]) == 0
    assert main(["synth", "--count", "5", "--seed", "2", "--out-dir", str(b)]) == 0
    assert read(a / "manifest.jsonl") == read(b / "manifest.jsonl")
    first = json.loads(read(a / "manifest.jsonl").splitlines()[0])
    assert read(a / first["image"]) == read(b / first["image"])
    assert "wrote 5 scenes" in capsys.readouterr().out


# --- attack -----------------------------------------------------------------------------


def attack_argv(out, trace, jobs=1, extra=()):
    return [
        "attack", "--synth", "4", "--synth-seed", "2",
        "--m", "1", "--l", "0.2", "--lambda", "0", "--pixel-value", "0.2",
        "--pop", "6", "--epochs", "2", "--seed", "5", "--jobs", str(jobs),
        "--out", str(out), "--trace", str(trace), *extra,
    ]


def test_attack_outputs_are_byte_identical_across_runs_and_jobs(tmp_path):
    g1, t1 = tmp_path / "g1.json", tmp_path / "t1.csv"
    g2, t2 = tmp_path / "g2.json", tmp_path / "t2.csv"
    g3, t3 = tmp_path / "g3.json", tmp_path / "t3.csv"
    assert main(attack_argv(g1, t1)) == 0
    assert main(attack_argv(g2, t2)) == 0
    assert main(attack_argv(g3, t3, jobs=2)) == 0
    assert read(g1) == read(g2) == read(g3)
    assert read(t1) == read(t2) == read(t3)


def test_attack_trace_and_meta_round_trip(tmp_path, capsys):
    out, trace = tmp_path / "g.json", tmp_path / "t.csv"
    assert main(attack_argv(out, trace)) == 0
    assert "train_ap=" in capsys.readouterr().out
    genome, meta = load_genome(out)
    assert genome.m == 1
    assert meta["seed"] == 5 and meta["lambda"] == 0.0 and meta["detector_id"] == "toy"
    with open(trace, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "best_loss", "best_n", "mean_loss", "evals"]
    assert len(rows) == 1 + 3  # step 0 plus two epochs
    assert float(rows[-1][1]) == meta["fitness"]


# --- apply / evaluate -------------------------------------------------------------------


def test_apply_then_evaluate_matches_direct_evaluation(tmp_path, genome_file):
    direct = tmp_path / "direct.json"
    assert main([
        "evaluate", "--synth", "6", "--synth-seed", "2",
        "--genome", genome_file, "--report", str(direct),
    ]) == 0
    applied = tmp_path / "applied"
    assert main([
        "apply", "--synth", "6", "--synth-seed", "2",
        "--genome", genome_file, "--out-dir", str(applied),
    ]) == 0
    rendered = tmp_path / "rendered.json"
    assert main([
        "evaluate", "--dataset", str(applied / "manifest.jsonl"),
        "--report", str(rendered),
    ]) == 0
    r_direct = json.loads(read(direct))
    r_rendered = json.loads(read(rendered))
    assert r_rendered["ap"] == r_direct["ap"]


def test_clean_evaluation_has_no_asr(tmp_path, capsys):
    report = tmp_path / "clean.json"
    pr = tmp_path / "pr.csv"
    assert main([
        "evaluate", "--synth", "4", "--synth-seed", "1",
        "--report", str(report), "--pr-csv", str(pr),
    ]) == 0
    assert "(clean run)" in capsys.readouterr().out
    data = json.loads(read(report))
    assert "asr" not in data
    assert data["ap"] == data["clean_ap"] == 1.0
    with open(pr, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["recall", "precision"]
    assert len(rows) > 1


# --- baseline ---------------------------------------------------------------------------


def test_baseline_reports_asr(tmp_path, capsys):
    report = tmp_path / "r.json"
    assert main([
        "baseline", "--synth", "4", "--synth-seed", "2", "--kind", "random",
        "--m", "2", "--l", "0.12", "--seed", "0", "--report", str(report),
    ]) == 0
    assert "asr=" in capsys.readouterr().out
    assert "asr" in json.loads(read(report))


# --- sweep ------------------------------------------------------------------------------


def sweep_argv(out, l_list, resume=False):
    argv = [
        "sweep", "--synth", "3", "--synth-seed", "2",
        "--m-list", "1", "--l-list", l_list, "--seeds", "0",
        "--pop", "4", "--epochs", "1", "--jobs", "1", "--out", str(out),
    ]
    return argv + ["--resume"] if resume else argv


def test_sweep_covers_the_grid_and_resumes(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(sweep_argv(out, "0.2")) == 0
    with open(out, newline="") as fh:
        first = list(csv.reader(fh))
    assert first[0] == ["method", "m", "l", "ap", "asr"]
    assert [r[0] for r in first[1:]] == ["hcb", "r", "mr"]

    assert main(sweep_argv(out, "0.2,0.3", resume=True)) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 6
    assert rows[:4] == first  # resumed cells were not recomputed
    assert {(r[0], r[2]) for r in rows[4:]} == {("hcb", "0.3"), ("r", "0.3"), ("mr", "0.3")}


# --- augment / convert ------------------------------------------------------------------


def test_augment_emits_paired_scenes(tmp_path, genome_file):
    out = tmp_path / "aug"
    assert main([
        "augment", "--synth", "3", "--synth-seed", "4",
        "--genome", genome_file, "--out-dir", str(out), "--format", "pgm",
    ]) == 0
    rows = [json.loads(line) for line in read(out / "manifest.jsonl").splitlines()]
    assert len(rows) == 6
    adv = [r for r in rows if r["id"].endswith("-adv")]
    assert len(adv) == 3
    for r in adv:
        assert r["source"] == r["id"][: -len("-adv")]
        assert os.path.exists(out / r["image"])


def test_convert_builds_a_manifest_from_yolo_labels(tmp_path):
    import numpy as np
    from sspatch.image import write_gray

    images, labels = tmp_path / "images", tmp_path / "labels"
    images.mkdir(), labels.mkdir()
    write_gray(images / "s1.png", np.zeros((300, 200)))
    (labels / "s1.txt").write_text("0 0.5 0.5 0.25 0.5\n1 0.1 0.1 0.05 0.05\n")
    out = tmp_path / "manifest.jsonl"
    assert main([
        "convert", "--images", str(images), "--labels", str(labels), "--out", str(out),
    ]) == 0
    rows = [json.loads(line) for line in read(out).splitlines()]
    assert len(rows) == 1
    assert rows[0]["persons"] == [{"x": 75.0, "y": 75.0, "w": 50.0, "h": 150.0}]


# --- config layering --------------------------------------------------------------------


def test_config_file_layers_under_cli_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"m": 2, "epochs": 1, "seed": 9}))
    out, trace = tmp_path / "g.json", tmp_path / "t.csv"
    assert main([
        "attack", "--synth", "4", "--synth-seed", "2", "--l", "0.2", "--pop", "6",
        "--epochs", "2", "--jobs", "1", "--out", str(out), "--trace", str(trace),
        "--config", str(cfg),
    ]) == 0
    genome, meta = load_genome(out)
    assert genome.m == 2  # from config (no CLI flag)
    assert meta["seed"] == 9  # from config
    with open(trace, newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 3  # CLI --epochs 2 beat the config's 1


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"turbo": True}))
    code = main(["evaluate", "--synth", "2", "--config", str(cfg)])
    assert code == 2
    assert "turbo" in capsys.readouterr().err


def test_config_must_be_json(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("not json {")
    assert main(["evaluate", "--synth", "2", "--config", str(cfg)]) == 2


# --- detector plumbing and exit codes -----------------------------------------------------


def test_detector_command_comes_from_the_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(
        "SSP_DETECTOR_CMD", f"{sys.executable} {LINE_SERVER} --mode fixed --name env-fake"
    )
    assert main(["evaluate", "--synth", "2", "--synth-seed", "1", "--detector", "external"]) == 0
    assert "ap=" in capsys.readouterr().out


def test_external_detector_without_command_is_a_usage_error(capsys, monkeypatch):
    monkeypatch.delenv("SSP_DETECTOR_CMD", raising=False)
    assert main(["evaluate", "--synth", "2", "--detector", "external"]) == 2
    assert "error: usage" in capsys.readouterr().err


def test_dataset_and_synth_are_mutually_exclusive():
    assert main(["evaluate", "--synth", "2", "--dataset", "x.jsonl"]) == 2
    assert main(["evaluate"]) == 2


def test_bad_epochs_is_a_usage_error(tmp_path):
    argv = attack_argv(tmp_path / "g.json", tmp_path / "t.csv")
    argv[argv.index("--epochs") + 1] = "0"
    assert main(argv) == 2


def test_missing_manifest_is_a_data_error(capsys):
    assert main(["evaluate", "--dataset", "/no/such/manifest.jsonl"]) == 3
    assert "error: data" in capsys.readouterr().err


def test_broken_detector_command_is_a_transport_error(capsys):
    code = main([
        "evaluate", "--synth", "2",
        "--detector", "external", "--detector-cmd", "/no/such/binary",
    ])
    assert code == 4
    assert "error: detector" in capsys.readouterr().err


def test_degenerate_patch_scale_is_infeasible(tmp_path, capsys):
    argv = attack_argv(tmp_path / "g.json", tmp_path / "t.csv")
    argv[argv.index("--l") + 1] = "0.01"
    assert main(argv) == 5
    assert "error: infeasible" in capsys.readouterr().err


def test_missing_required_flag_exits_via_argparse(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["attack", "--synth", "2"])  # no --out
    assert exc.value.code == 2
