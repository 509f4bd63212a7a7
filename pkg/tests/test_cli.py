import json
import os
import subprocess
import sys

import pytest

from gnrisk.cli import main


def _dir_bytes(path):
    return {n: open(os.path.join(path, n), "rb").read() for n in sorted(os.listdir(path))}


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    cfg = d / "small.cfg"
    cfg.write_text("n_customers = 900\nn_months = 24\n")
    assert main(["synth", "--seed", "5", "--config", str(cfg), "--out-dir", str(d / "ds")]) == 0
    return d / "ds", cfg


def test_synth_is_idempotent(data, tmp_path):
    _, cfg = data
    for name in ("a", "b"):
        assert main(["synth", "--seed", "5", "--config", str(cfg), "--out-dir", str(tmp_path / name)]) == 0
    assert _dir_bytes(tmp_path / "a") == _dir_bytes(tmp_path / "b")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert {o["path"] for o in manifest["outputs"]} == {"customers.csv", "contracts.csv", "guarantees.csv",
                                                        "repayments.csv"}
    assert manifest["config"]["n_customers"] == 900 and len(manifest["config_sha256"]) == 64


def test_exit_codes(data, tmp_path, capsys):
    ds, _ = data
    assert main([]) == 1
    assert main(["nonsense"]) == 1
    assert main(["stats", "--data-dir", str(ds), "--bogus"]) == 1
    assert main(["stats", "--data-dir", str(tmp_path / "missing"), "--out-dir", str(tmp_path)]) == 2
    broken = tmp_path / "broken"
    broken.mkdir()
    for f in ds.iterdir():
        if f.suffix == ".csv":
            (broken / f.name).write_bytes(f.read_bytes())
    lines = (broken / "contracts.csv").read_text().splitlines()
    lines[1] = lines[1].replace(",", ",x", 1)
    (broken / "contracts.csv").write_text("\n".join(lines) + "\n")
    assert main(["stats", "--data-dir", str(broken), "--out-dir", str(tmp_path / "o")]) == 2
    assert "contracts.csv" in capsys.readouterr().err


def test_help_lists_every_flag_with_defaults():
    out = subprocess.run([sys.executable, "-m", "gnrisk.cli", "train", "--help"], capture_output=True, text=True,
                         check=True).stdout
    for flag in ("--data-dir", "--out-dir", "--seed", "--config", "--threads", "--quarter", "--ablation",
                 "--K", "--eta", "--max-depth", "--gamma", "--lambda", "--min-child-hessian", "--base-score"):
        assert flag in out
    assert "default" in out


def test_pipeline_subcommands(data, tmp_path):
    ds, _ = data
    common = ["--data-dir", str(ds), "--out-dir", str(tmp_path)]
    assert main(["stats", *common]) == 0
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert 0 < stats["default_rate"] < 0.2
    assert main(["graph", *common]) == 0
    assert main(["centrality", *common, "--component", "1"]) == 0
    assert (tmp_path / "centrality.csv").read_text().startswith("component,")
    assert main(["communities", *common, "--min-size", "3"]) == 0
    risk = json.loads((tmp_path / "community_risk.json").read_text())
    assert all(0 <= r["default_rate"] <= 1 for r in risk)
    assert main(["features", *common, "--quarter", "2013Q1"]) == 0
    assert (tmp_path / "features_2013Q1.categories.json").exists()
    assert main(["train", *common, "--quarter", "2013Q1", "--K", "10"]) == 0
    model = tmp_path / "model.json"
    assert main(["predict", *common, "--model", str(model), "--quarter", "2013Q2"]) == 0
    rows = (tmp_path / "predictions_2013Q2.csv").read_text().splitlines()
    assert rows[0] == "customer_id,probability" and len(rows) > 10


def test_rolling_outputs_and_idempotence(data, tmp_path):
    ds, _ = data
    args = ["rolling", "--data-dir", str(ds), "--start", "2012Q2", "--windows", "3", "--K", "15"]
    assert main([*args, "--out-dir", str(tmp_path / "a")]) == 0
    assert main([*args, "--out-dir", str(tmp_path / "b")]) == 0
    assert _dir_bytes(tmp_path / "a") == _dir_bytes(tmp_path / "b")
    lines = (tmp_path / "a" / "auc_by_window.csv").read_text().splitlines()
    assert lines[0] == "window,NW,NW+CM,NW+N,H" and len(lines) == 4


def test_rolling_past_the_data_is_an_error(data, tmp_path):
    ds, _ = data
    code = main(["rolling", "--data-dir", str(ds), "--out-dir", str(tmp_path), "--start", "2013Q3",
                 "--windows", "4"])
    assert code == 2
    assert main(["rolling", "--data-dir", str(ds), "--out-dir", str(tmp_path), "--windows", "0"]) == 1


def test_selftest_passes(tmp_path):
    assert main(["selftest", "--out-dir", str(tmp_path)]) == 0
    assert all(line.startswith("PASS") for line in (tmp_path / "selftest.txt").read_text().splitlines())
