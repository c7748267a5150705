"""CLI tests via the click runner: happy paths, config defaults, and error exits."""

import json

import pytest
from click.testing import CliRunner

from stvqc.cli import main, read_config


@pytest.fixture
def runner():
    return CliRunner()


def test_gen_data_writes_files(runner, tmp_path):
    result = runner.invoke(main, ["gen-data", "--id", "L1", "--n-train", "20",
                                  "--n-test", "10", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "L1_train.csv").exists()
    assert (tmp_path / "L1_test.csv").exists()


def test_gen_data_unknown_id_fails_with_valid_list(runner, tmp_path):
    result = runner.invoke(main, ["gen-data", "--id", "Z9", "--out", str(tmp_path)])
    assert result.exit_code != 0
    assert "N1" in result.output and "L2" in result.output


def test_gen_data_deterministic(runner, tmp_path):
    for sub in ("a", "b"):
        runner.invoke(main, ["gen-data", "--id", "N3", "--n-train", "15",
                             "--n-test", "5", "--seed", "9", "--out", str(tmp_path / sub)])
    assert ((tmp_path / "a" / "N3_train.csv").read_bytes()
            == (tmp_path / "b" / "N3_train.csv").read_bytes())


def test_train_and_eval_round_trip(runner, tmp_path):
    result = runner.invoke(main, ["train", "--dataset", "L1", "--n-train", "40",
                                  "--n-test", "20", "--epochs", "10",
                                  "--copies", "1", "--ansatz", "vqc", "--blocks", "2",
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert 0.0 <= payload["test_acc"] <= 1.0
    report_path = payload["report"]
    ev = runner.invoke(main, ["eval", "--report", report_path, "--n-test", "20"])
    assert ev.exit_code == 0, ev.output
    assert "accuracy" in json.loads(ev.output)


def test_train_without_dataset_fails(runner):
    result = runner.invoke(main, ["train"])
    assert result.exit_code != 0


def test_train_missing_data_dir_fails(runner, tmp_path):
    result = runner.invoke(main, ["train", "--dataset", "N1",
                                  "--data-dir", str(tmp_path / "nope")])
    assert result.exit_code != 0


def test_compile_naive_metrics(runner, tmp_path):
    qasm = tmp_path / "c.qasm"
    qasm.write_text("OPENQASM 2.0;\nqreg q[3];\nh q[0];\ncx q[0],q[2];\n")
    result = runner.invoke(main, ["compile", "--circuit", str(qasm),
                                  "--strategy", "naive", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    metrics = json.loads(result.output)
    assert set(metrics) == {"depth", "cx_count", "swap_count", "param_count"}
    assert (tmp_path / "c_naive_metrics.json").exists()


def test_compile_swap_free_has_zero_swaps(runner, tmp_path):
    qasm = tmp_path / "c.qasm"
    qasm.write_text("OPENQASM 2.0;\nqreg q[4];\nh q[0];\n")
    result = runner.invoke(main, ["compile", "--circuit", str(qasm),
                                  "--strategy", "swap-free", "--blocks", "2",
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["swap_count"] == 0


def test_compile_missing_file_fails(runner):
    result = runner.invoke(main, ["compile", "--circuit", "/nonexistent.qasm"])
    assert result.exit_code != 0


def test_bad_topology_fails(runner, tmp_path):
    qasm = tmp_path / "c.qasm"
    qasm.write_text("OPENQASM 2.0;\nqreg q[2];\nh q[0];\n")
    result = runner.invoke(main, ["compile", "--circuit", str(qasm),
                                  "--topology", "no-such-device"])
    assert result.exit_code != 0


def test_report_aggregates(runner, tmp_path):
    runner.invoke(main, ["train", "--dataset", "L1", "--n-train", "30",
                         "--n-test", "10", "--epochs", "3", "--copies", "1",
                         "--ansatz", "vqc", "--out", str(tmp_path)])
    result = runner.invoke(main, ["report", "--dir", str(tmp_path),
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0].startswith("file,dataset,test_acc")
    assert len(lines) == 2


def test_report_empty_dir_fails(runner, tmp_path):
    result = runner.invoke(main, ["report", "--dir", str(tmp_path)])
    assert result.exit_code != 0


def test_config_file_supplies_defaults(runner, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('[gen-data]\nid = "L1"\nn-train = 12\nn-test = 6\n'
                   f'out = "{tmp_path}"\n')
    result = runner.invoke(main, ["--config", str(cfg), "gen-data"])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["n_train"] == 12


def test_read_config_parsing(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('top = 1\n[sec]\nname = "x"  # comment\nflag = true\n'
                   'ratio = 0.5\nitems = [1, 2]\n')
    parsed = read_config(cfg)
    assert parsed["top"] == 1
    assert parsed["sec"] == {"name": "x", "flag": True, "ratio": 0.5, "items": [1, 2]}


def test_output_dir_env_var(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("STVQC_OUT", str(tmp_path / "envout"))
    result = runner.invoke(main, ["gen-data", "--id", "L1", "--n-train", "10",
                                  "--n-test", "5"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "envout" / "L1_train.csv").exists()


def test_search_command_short_run(runner, tmp_path):
    result = runner.invoke(main, ["search", "--dataset", "L1", "--episodes", "4",
                                  "--n-train", "30", "--n-val", "20",
                                  "--epochs", "2", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    best = json.loads((tmp_path / "search_L1_seed0_best.json").read_text())
    assert best["model"]["encoder"]["dataset"] == "L1"
    hist = (tmp_path / "search_L1_seed0.csv").read_text().splitlines()
    assert hist[0] == "episode,acc,P,R"
    assert len(hist) == 5
