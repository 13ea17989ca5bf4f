import json

import pytest
from click.testing import CliRunner

from main import app


@pytest.fixture
def runner(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return CliRunner()


@pytest.fixture
def config_file(tiny_run_config, tmp_path):
    path = tmp_path / "run.json"
    path.write_text(tiny_run_config.model_dump_json(), encoding="utf-8")
    return path


def result_line(result):
    return json.loads(result.stdout.strip().splitlines()[-1])


def error_line(result):
    return json.loads(result.stderr.strip().splitlines()[-1])


def test_gen_data(runner, config_file, tiny_run_config):
    result = runner.invoke(app, ["gen-data", "--config", str(config_file)])
    assert result.exit_code == 0, result.stderr
    line = result_line(result)
    assert line["status"] == "ok" and line["command"] == "gen-data"
    assert line["data"]["path"] == tiny_run_config.dataset_path
    assert 0.0 < line["data"]["span_coverage"] <= 1.0


def test_train_eval_and_export(runner, config_file, tiny_run_config, tmp_path):
    assert runner.invoke(app, ["gen-data", "--config", str(config_file)]).exit_code == 0

    result = runner.invoke(app, ["train", "--config", str(config_file), "--no-align", "--seed", "4"])
    assert result.exit_code == 0, result.stderr
    data = result_line(result)["data"]
    assert data["use_alignment"] is False
    assert data["steps"] == 10
    checkpoint = tmp_path / "train" / "checkpoint.json"
    assert checkpoint.exists()

    result = runner.invoke(
        app, ["eval", "--checkpoint", str(checkpoint), "--dataset", tiny_run_config.dataset_path, "--split", "eval"]
    )
    assert result.exit_code == 0, result.stderr
    report = result_line(result)["data"]
    assert report["split"] == "eval" and report["epoch"] == 2
    assert report == data["final_report"] | {"epoch": 2}

    result = runner.invoke(
        app,
        [
            "export-attention",
            "--checkpoint", str(checkpoint),
            "--dataset", tiny_run_config.dataset_path,
            "--record-id", "0",
            "--sum-heads",
            "--out-dir", str(tmp_path / "attention"),
        ],
    )
    assert result.exit_code == 0, result.stderr
    data = result_line(result)["data"]
    assert data["layer"] == 0
    assert data["files"] == ["attention_L0_sum.csv"]
    assert (tmp_path / "attention" / "attention_L0.json").exists()


def test_export_rejects_bad_layer(runner, config_file, tiny_run_config, tmp_path):
    runner.invoke(app, ["gen-data", "--config", str(config_file)])
    runner.invoke(app, ["train", "--config", str(config_file)])
    result = runner.invoke(
        app,
        [
            "export-attention",
            "--checkpoint", str(tmp_path / "train" / "checkpoint.json"),
            "--dataset", tiny_run_config.dataset_path,
            "--record-id", "0",
            "--layer", "7",
        ],
    )
    assert result.exit_code == 1
    assert error_line(result)["error"] == "export_error"


def test_ablate_needs_three_seeds(runner, config_file):
    result = runner.invoke(app, ["ablate", "--config", str(config_file), "--seeds", "0,1"])
    assert result.exit_code == 2
    line = error_line(result)
    assert line["error"] == "config_error"
    assert "at least 3" in line["message"]


def test_invalid_config_field(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"epochs": 0}), encoding="utf-8")
    result = runner.invoke(app, ["gen-data", "--config", str(path)])
    assert result.exit_code == 2
    line = error_line(result)
    assert line["error"] == "config_error"
    assert line["message"].startswith("epochs:")
    assert result.stdout == ""


def test_missing_dataset(runner, config_file):
    result = runner.invoke(app, ["train", "--config", str(config_file), "--dataset", "missing.jsonl"])
    assert result.exit_code == 3
    line = error_line(result)
    assert line["error"] == "dataset_format"
    assert "dataset file not found" in line["message"]


def test_missing_config_file(runner):
    result = runner.invoke(app, ["train", "--config", "nope.json"])
    assert result.exit_code == 2
    assert error_line(result)["error"] == "config_error"


def test_eval_rejects_negative_layer(runner, config_file, tiny_run_config, tmp_path):
    runner.invoke(app, ["gen-data", "--config", str(config_file)])
    runner.invoke(app, ["train", "--config", str(config_file)])
    result = runner.invoke(
        app,
        [
            "eval",
            "--checkpoint", str(tmp_path / "train" / "checkpoint.json"),
            "--dataset", tiny_run_config.dataset_path,
            "--layer", "-1",
        ],
    )
    assert result.exit_code == 2
    line = error_line(result)
    assert line["error"] == "config_error"
    assert line["message"].startswith("attention_layer:")
    assert result.stdout == ""


def test_negative_seed_is_a_config_error(runner, config_file, tmp_path):
    result = runner.invoke(app, ["train", "--config", str(config_file), "--seed", "-1"])
    assert result.exit_code == 2
    assert error_line(result)["message"].startswith("seed:")

    path = tmp_path / "negative_world_seed.json"
    path.write_text(json.dumps({"world": {"seed": -3}}), encoding="utf-8")
    result = runner.invoke(app, ["gen-data", "--config", str(path)])
    assert result.exit_code == 2
    assert error_line(result)["message"].startswith("world.seed:")
