import json

import numpy as np
import pytest

import gspsample as gs
from gspsample.cli import main


@pytest.fixture(scope="module")
def surrogate_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "data.txt"
    gs.write_surrogate_intel_file(path, seed=0, n_epochs=260)
    return path


def window_args(surrogate_file):
    return ["--data", str(surrogate_file), "--epoch-start", "1",
            "--epoch-end", "260"]


def test_ingest(surrogate_file, tmp_path, capsys):
    assert main(["ingest", "--output-dir", str(tmp_path)]
                + window_args(surrogate_file)) == 0
    assert (tmp_path / "window.csv").exists()
    rejects = json.loads((tmp_path / "rejects.json").read_text())
    assert rejects["accepted"] > 0
    assert "accepted" in capsys.readouterr().out


@pytest.fixture(scope="module")
def learned_dir(surrogate_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("learned")
    main(["learn", "--output-dir", str(out), "--alpha", "100", "--beta", "100"]
         + window_args(surrogate_file))
    return out


def test_learn_outputs(learned_dir):
    graph = gs.graph_from_dict(json.loads((learned_dir / "graph.json").read_text()))
    assert graph.n == 54
    lines = (learned_dir / "convergence.csv").read_text().strip().splitlines()
    assert lines[0] == "snapshots_seen,rel_change"
    assert len(lines) > 1


def test_partition_and_duty_line(surrogate_file, learned_dir, tmp_path, capsys):
    assert main(["partition", "--output-dir", str(tmp_path),
                 "--graph", str(learned_dir / "graph.json"),
                 "--epsilon", "0.5", "--eta", "0.001",
                 "--energy-frac", "0.99995"]
                + window_args(surrogate_file)) == 0
    out = capsys.readouterr().out
    assert "duty cycle" in out
    plan_path = tmp_path / "plan_eps_0.5.json"
    plan = gs.SamplingPlan.from_json_dict(json.loads(plan_path.read_text()))
    assert plan.epsilon == 0.5
    assert sorted(v for s in plan.sets for v in s) == list(range(54))


def test_sweep_csv(surrogate_file, learned_dir, tmp_path):
    assert main(["sweep", "--output-dir", str(tmp_path),
                 "--graph", str(learned_dir / "graph.json"),
                 "--epsilons", "0.5", "1.0", "--eta", "0.001"]
                + window_args(surrogate_file)) == 0
    lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "epsilon,n_sets,max_rmse"
    assert len(lines) == 3


def test_schedule_replay(surrogate_file, learned_dir, tmp_path):
    main(["partition", "--output-dir", str(tmp_path),
          "--graph", str(learned_dir / "graph.json"),
          "--epsilon", "0.5", "--eta", "0.001"]
         + window_args(surrogate_file))
    assert main(["schedule", "--output-dir", str(tmp_path),
                 "--graph", str(learned_dir / "graph.json"),
                 "--plan", str(tmp_path / "plan_eps_0.5.json"),
                 "--eta", "0.001"]
                + window_args(surrogate_file)) == 0
    lines = (tmp_path / "schedule_rmse.csv").read_text().strip().splitlines()
    assert lines[0] == "round,set_index,rmse"


def test_synth_bandlimited(tmp_path):
    assert main(["synth", "--output-dir", str(tmp_path), "--mode", "bandlimited",
                 "--nodes", "12", "--bandwidth", "2", "--epochs", "20",
                 "--seed", "4"]) == 0
    signals = (tmp_path / "signals.csv").read_text().strip().splitlines()
    assert len(signals) == 21
    graph = gs.graph_from_dict(json.loads((tmp_path / "graph.json").read_text()))
    assert graph.n == 12


def test_synth_intel_like(tmp_path):
    assert main(["synth", "--output-dir", str(tmp_path), "--mode", "intel-like",
                 "--epochs", "30", "--seed", "1"]) == 0
    records, _ = gs.parse_intel(tmp_path / "data.txt")
    assert len(records) > 0


def test_experiment_subcommand(tmp_path):
    config = tmp_path / "config.toml"
    config.write_text(
        "[experiment]\n"
        "seed = 1\n"
        "epsilons = [0.5, 1.0]\n"
        "energy_frac = 0.99995\n"
        "[dataset]\n"
        "source = \"surrogate\"\n"
        "epoch_start = 1\n"
        "epoch_end = 200\n"
        "n_epochs = 200\n"
        "[learn]\n"
        "alpha = 100.0\n"
        "beta = 100.0\n"
        "batch_epochs = 50\n"
        "[reconstruct]\n"
        "eta = 0.001\n"
    )
    out = tmp_path / "run"
    assert main(["experiment", "--config", str(config),
                 "--output-dir", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stages"] == ["ingest", "learn", "order", "sweep", "duty"]
    for name in ("window.csv", "convergence.csv", "graph.json", "sweep.csv",
                 "duty.csv", "rejects.json", "plan_eps_0.5.json"):
        assert (out / name).exists(), name


def test_config_supplies_defaults_and_eta_auto(surrogate_file, learned_dir,
                                               tmp_path, capsys):
    config = tmp_path / "config.toml"
    config.write_text(
        "[experiment]\n"
        "energy_frac = 0.99995\n"
        "[dataset]\n"
        "source = \"intel\"\n"
        f"path = \"{surrogate_file}\"\n"
        "epoch_start = 1\n"
        "epoch_end = 260\n"
        "[reconstruct]\n"
        "eta = \"auto\"\n"
        "eta_grid_points = 5\n"
    )
    assert main(["partition", "--output-dir", str(tmp_path),
                 "--config", str(config),
                 "--graph", str(learned_dir / "graph.json"),
                 "--epsilon", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "tuned eta" in out
    assert (tmp_path / "plan_eps_0.5.json").exists()


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
