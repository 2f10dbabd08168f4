import csv
import json

import pytest

from hiercat import __version__
from hiercat.cli import main

FAST = ["--epochs", "3", "--learning-rate", "0.01"]


@pytest.fixture(scope="module")
def sim_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--scenario", "h_only-gaussian", "--per-leaf", "12", "--seed", "2",
                 "--test-per-leaf", "4", "--out", str(out)]) == 0
    return out / "outputs"


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main([]) == 2
    assert main(["no-such-command"]) == 2
    assert main(["reduce", "--embeddings", "e.csv", "--hierarchy", "h.csv", "--si-star", "1.5",
                 "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--scenario", "h_only-gaussian", "--per-leaf", "5",
                 "--per-leaf-range", "1", "2", "--out", str(tmp_path)]) == 2
    assert main(["sweep-si", "--embeddings", "e.csv", "--hierarchy", "h.csv", "--grid", "0.1,x",
                 "--out", str(tmp_path)]) == 2


def test_runtime_errors_exit_1(tmp_path, sim_run, capsys):
    assert main(["reduce", "--embeddings", str(tmp_path / "missing.csv"), "--hierarchy",
                 str(sim_run / "hierarchy.csv"), "--si-star", "0.5", "--out", str(tmp_path / "r")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("y,h_leaf,x1\n1.0,nowhere,2\n")
    assert main(["train-embed", "--data", str(bad), "--hierarchy", str(sim_run / "hierarchy.csv"),
                 "--out", str(tmp_path / "t"), *FAST]) == 1
    assert "NotALeafError" in capsys.readouterr().err


def test_simulate_outputs(sim_run):
    assert len(rows(sim_run / "data.csv")) == 86 * 12
    assert len(rows(sim_run / "test.csv")) == 86 * 4
    assert json.loads((sim_run / "truth.json").read_text())["sizes"] == [2, 4, 5]
    config = json.loads((sim_run.parent / "config.json").read_text())
    assert config["hiercat_version"] == __version__ and config["sim"]["seed"] == 2


@pytest.mark.slow
def test_simulate_full_size(tmp_path):
    assert main(["simulate", "--scenario", "h_and_x-poisson", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "outputs" / "data.csv") as fh:
        assert sum(1 for _ in fh) == 86_000 + 1


def test_train_reduce_sweep(tmp_path, sim_run):
    h = str(sim_run / "hierarchy.csv")
    assert main(["train-embed", "--data", str(sim_run / "data.csv"), "--hierarchy", h,
                 "--seed", "1", "--out", str(tmp_path / "emb"), *FAST]) == 0
    emb = tmp_path / "emb" / "outputs"
    assert {p.name for p in emb.iterdir()} == {"embeddings.csv", "network.json", "standardizer.json"}
    assert len(rows(tmp_path / "emb" / "trace" / "loss.csv")) == 3

    assert main(["reduce", "--embeddings", str(emb / "embeddings.csv"), "--hierarchy", h,
                 "--si-star", "0.5", "--out", str(tmp_path / "red")]) == 0
    red = tmp_path / "red"
    assert len(rows(red / "outputs" / "groups.csv")) == 86
    assert (red / "trace" / "steps.jsonl").read_text().count("\n") > 1

    assert main(["sweep-si", "--embeddings", str(emb / "embeddings.csv"), "--hierarchy", h,
                 "--grid", "0.1,0.9", "--out", str(tmp_path / "sw")]) == 0
    sweep = rows(tmp_path / "sw" / "outputs" / "sweep.csv")
    assert [r["si_star"] for r in sweep] == ["0.1", "0.9"]
    assert (tmp_path / "sw" / "outputs" / "reduced_si0.9.json").exists()


def test_evaluate_with_split(tmp_path, sim_run):
    out = tmp_path / "ev"
    assert main(["evaluate", "--data", str(sim_run / "data.csv"), "--hierarchy",
                 str(sim_run / "hierarchy.csv"), "--grid", "0.3,0.7", "--split", "0.8",
                 "--stratum", "2", "--out", str(out), *FAST]) == 0
    comp = rows(out / "outputs" / "comparison.csv")
    assert [r["model"] for r in comp] == ["h", "si0.3", "si0.7"]
    assert list(comp[0]) == ["model", "si_star", "n_groups", "aic", "bic", "rmse", "best"]
    assert comp[0]["n_groups"] == "86" and all(r["rmse"] for r in comp)
    for name in ("fit_h.json", "fit_si0.3.json", "reduced_si0.7.json", "groups_si0.3.csv",
                 "embeddings.csv"):
        assert (out / "outputs" / name).exists()
    assert (out / "trace" / "steps_si0.3.jsonl").exists()


def test_evaluate_without_test_data_omits_rmse(tmp_path, sim_run):
    out = tmp_path / "ev"
    with pytest.warns(UserWarning, match="RMSE"):
        code = main(["evaluate", "--data", str(sim_run / "data.csv"), "--hierarchy",
                     str(sim_run / "hierarchy.csv"), "--grid", "0.5", "--out", str(out), *FAST])
    assert code == 0
    comp = rows(out / "outputs" / "comparison.csv")
    assert "rmse" not in comp[0]
    assert json.loads((out / "outputs" / "fit_h.json").read_text())["rmse_test"] is None


def test_evaluate_test_and_split_conflict(tmp_path, sim_run):
    assert main(["evaluate", "--data", str(sim_run / "data.csv"), "--hierarchy",
                 str(sim_run / "hierarchy.csv"), "--grid", "0.5", "--split", "0.8",
                 "--test", str(sim_run / "test.csv"), "--out", str(tmp_path)]) == 2


def test_config_file_supplies_defaults(tmp_path, sim_run):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 2, "learning_rate": 0.01, "seed": 4}))
    out = tmp_path / "emb"
    assert main(["train-embed", "--data", str(sim_run / "data.csv"), "--hierarchy",
                 str(sim_run / "hierarchy.csv"), "--config", str(cfg), "--out", str(out)]) == 0
    record = json.loads((out / "config.json").read_text())
    assert record["epochs"] == 2 and record["seed"] == 4
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["train-embed", "--data", str(sim_run / "data.csv"), "--hierarchy",
                 str(sim_run / "hierarchy.csv"), "--config", str(cfg), "--out", str(out)]) == 2


def test_experiment_command(tmp_path):
    out = tmp_path / "exp"
    assert main(["experiment", "--scenario", "none-gaussian", "--per-leaf", "10",
                 "--replicates", "1", "--out", str(out), *FAST]) == 0
    summary = json.loads((out / "outputs" / "summary.json").read_text())["summary"]
    assert summary["runs"] == 1
    assert main(["experiment", "--scenario", "none-gaussian", "--per-leaf", "10",
                 "--replicates", "0", "--out", str(out)]) == 2


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("HIERCAT_THREADS", "many")
    assert main(["experiment", "--scenario", "none-gaussian", "--per-leaf", "10",
                 "--replicates", "2", "--out", str(tmp_path), *FAST]) == 1
