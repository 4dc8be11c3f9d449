import json

import pytest

from samasa.cli import main
from samasa.data import write_jsonl_dataset
from samasa.service import AnnotationStore
from synthetic import separable_dataset
from test_training import TINY_ENC, tiny_config


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = separable_dataset(8)
    write_jsonl_dataset(root / "train.jsonl", data)
    write_jsonl_dataset(root / "dev.jsonl", data[:4])
    cfg = tiny_config(epochs=1).to_json()
    (root / "config.json").write_text(json.dumps(cfg), encoding="utf-8")
    return root


def run(*argv):
    return main([str(a) for a in argv])


def test_train_writes_checkpoint_and_log(workdir):
    out = workdir / "run1"
    code = run("train", "--data", workdir / "train.jsonl", "--dev", workdir / "dev.jsonl",
               "--config", workdir / "config.json", "--out", out)
    assert code == 0
    assert (out / "model.ckpt").exists()
    assert (out / "train_log.jsonl").read_text(encoding="utf-8").count("\n") == 1


def test_train_epochs_zero_writes_initialization(workdir):
    out = workdir / "init"
    code = run("train", "--data", workdir / "train.jsonl", "--config",
               workdir / "config.json", "--epochs", 0, "--out", out)
    assert code == 0
    assert (out / "model.ckpt").exists()
    assert (out / "train_log.jsonl").read_text(encoding="utf-8") == ""


def test_missing_file_is_one_line_error(workdir, capsys):
    code = run("train", "--data", workdir / "absent.jsonl", "--out", workdir / "x")
    assert code == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error:") and "\n" not in err


def test_eval_outputs(workdir):
    out = workdir / "eval1"
    code = run("eval", "--checkpoint", workdir / "run1" / "model.ckpt",
               "--data", workdir / "train.jsonl", "--out", out)
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
    assert 0.0 <= metrics["accuracy"] <= 1.0
    csv = (out / "confusion.csv").read_text(encoding="utf-8")
    assert csv.splitlines()[0].endswith("A,B,D,T")


def test_predict_byte_identical(workdir):
    a, b = workdir / "pred_a.jsonl", workdir / "pred_b.jsonl"
    for out in (a, b):
        code = run("predict", "--checkpoint", workdir / "run1" / "model.ckpt",
                   "--data", workdir / "dev.jsonl", "--out", out)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text(encoding="utf-8").splitlines()[0])
    assert report["label"] in {"A", "B", "D", "T"}


def test_data_stats(workdir, capsys):
    code = run("data-stats", "--train", workdir / "train.jsonl", "--dev", workdir / "dev.jsonl")
    assert code == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["splits"]["train"]["instances"] == 8
    assert stats["splits"]["dev"]["instances"] == 4
    assert stats["unique_compounds"] == 8


def test_heatmap_json_and_svg(workdir):
    out = workdir / "hm.json"
    svg = workdir / "hm.svg"
    code = run("heatmap", "--checkpoint", workdir / "run1" / "model.ckpt",
               "--tokens", "yasya pūrva0-para0 yasya", "--compound-index", 1,
               "--out", out, "--svg", svg)
    assert code == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert "pair" in payload["heatmaps"] and "attention" in payload["heatmaps"]
    assert svg.read_text(encoding="utf-8").startswith("<svg")


def test_grid_cli(workdir):
    spec = {
        "train": tiny_config(epochs=1).to_json(),
        "datasets": {"default": {"train": str(workdir / "train.jsonl"),
                                 "test": str(workdir / "dev.jsonl")}},
        "cells": [{"name": "ours"}, {"name": "-morph-DP", "ablation": "-morph-DP"}],
    }
    (workdir / "grid.json").write_text(json.dumps(spec), encoding="utf-8")
    out = workdir / "grid_out"
    code = run("grid", "--config", workdir / "grid.json", "--out", out)
    assert code == 0
    rows = json.loads((out / "grid.json").read_text(encoding="utf-8"))
    assert [r["name"] for r in rows] == ["ours", "-morph-DP"]
    csv_lines = (out / "grid.csv").read_text(encoding="utf-8").splitlines()
    assert len(csv_lines) == 3


def test_annotate_export_cli(workdir):
    journal = workdir / "journal.jsonl"
    queue = separable_dataset(3)
    for i, inst in enumerate(queue):
        inst.uid = f"q-{i}"
    store = AnnotationStore(queue, ["A", "B", "D", "T"], journal)
    store.submit("q-0", "a1", "B")
    store.submit("q-0", "a2", "B")
    out = workdir / "annot_out"
    code = run("annotate-export", "--journal", journal, "--out", out)
    assert code == 0
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["labels"] == {"q-0": "B"}
    lines = (out / "records.jsonl").read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 2


def test_cli_never_mutates_inputs(workdir):
    before = (workdir / "train.jsonl").read_bytes()
    run("data-stats", "--train", workdir / "train.jsonl")
    run("eval", "--checkpoint", workdir / "run1" / "model.ckpt",
        "--data", workdir / "train.jsonl", "--out", workdir / "eval_again")
    assert (workdir / "train.jsonl").read_bytes() == before
