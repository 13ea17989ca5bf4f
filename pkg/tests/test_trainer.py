import json

import pytest

from src.core.exceptions import ConfigError, NonFiniteError, TrainingDivergedError
from src.repositories.metrics import MetricsRepository
from src.services import trainer as trainer_module
from src.services.trainer import CHECKPOINT_FILE, EVAL_METRICS_FILE, METRICS_FILE, Trainer


def run(config, dataset, output_dir):
    header, records = dataset
    return Trainer(config, header, records, output_dir).run()


def test_same_seed_gives_identical_logs(tiny_run_config, tiny_dataset, tmp_path):
    first = run(tiny_run_config, tiny_dataset, tmp_path / "a")
    second = run(tiny_run_config, tiny_dataset, tmp_path / "b")
    for name in (METRICS_FILE, EVAL_METRICS_FILE):
        assert (first.output_dir / name).read_bytes() == (second.output_dir / name).read_bytes()


def test_different_seed_changes_the_run(tiny_run_config, tiny_dataset, tmp_path):
    first = run(tiny_run_config, tiny_dataset, tmp_path / "a")
    second = run(tiny_run_config.model_copy(update={"seed": 1}), tiny_dataset, tmp_path / "b")
    assert (first.output_dir / METRICS_FILE).read_bytes() != (second.output_dir / METRICS_FILE).read_bytes()


def test_metrics_log_layout(tiny_run_config, tiny_dataset, tmp_path):
    result = run(tiny_run_config, tiny_dataset, tmp_path / "run")
    rows = MetricsRepository(result.output_dir / METRICS_FILE).read()
    assert len(rows) == result.steps == 2 * 5
    assert [row["step"] for row in rows] == list(range(1, result.steps + 1))
    for row in rows:
        assert list(row)[:2] == ["step", "epoch"]
        assert list(row)[-2:] == ["total", "lr"]
        assert row["lr"] >= 0.0

    assert rows[0]["lr"] == pytest.approx(tiny_run_config.learning_rate / 2)
    assert rows[1]["lr"] == pytest.approx(tiny_run_config.learning_rate)
    assert rows[-1]["lr"] == pytest.approx(0.0)


def test_vqa_waits_for_its_start_epoch(tiny_run_config, tiny_dataset, tmp_path):
    result = run(tiny_run_config, tiny_dataset, tmp_path / "run")
    rows = MetricsRepository(result.output_dir / METRICS_FILE).read()
    assert tiny_run_config.vqa_start_epoch == 1
    assert not any("vqa" in row for row in rows if row["epoch"] == 0)
    assert any("vqa" in row for row in rows if row["epoch"] == 1)


def test_alignment_switch(tiny_run_config, tiny_dataset, tmp_path):
    with_align = run(tiny_run_config, tiny_dataset, tmp_path / "on")
    without = run(tiny_run_config.model_copy(update={"use_alignment": False}), tiny_dataset, tmp_path / "off")
    on_rows = MetricsRepository(with_align.output_dir / METRICS_FILE).read()
    off_rows = MetricsRepository(without.output_dir / METRICS_FILE).read()
    assert any("align" in row for row in on_rows)
    assert not any("align" in row for row in off_rows)
    assert "align" not in without.final_report.losses


def test_outputs_per_epoch(tiny_run_config, tiny_dataset, tmp_path):
    result = run(tiny_run_config, tiny_dataset, tmp_path / "run")
    reports = MetricsRepository(result.output_dir / EVAL_METRICS_FILE).read_reports()
    assert [r.epoch for r in reports] == [0, 1]
    assert reports == result.reports
    assert reports[-1].split == "eval"
    assert reports[-1].examples == 16
    assert (result.output_dir / CHECKPOINT_FILE).exists()
    assert json.loads((result.output_dir / CHECKPOINT_FILE).read_text(encoding="utf-8"))["epoch"] == 2


def test_non_finite_loss_stops_training(tiny_run_config, tiny_dataset, tmp_path, monkeypatch):
    def explode(*args, **kwargs):
        raise NonFiniteError("loss is nan")

    monkeypatch.setattr(trainer_module, "compute_losses", explode)
    with pytest.raises(TrainingDivergedError) as info:
        run(tiny_run_config, tiny_dataset, tmp_path / "run")
    assert info.value.step == 1


def test_needs_train_records(tiny_run_config, tiny_dataset, tmp_path):
    header, records = tiny_dataset
    with pytest.raises(ConfigError):
        Trainer(tiny_run_config, header, [r for r in records if r.split == "eval"], tmp_path)


@pytest.mark.parametrize("layer", [2, -1])
def test_attention_layer_must_exist(layer, tiny_run_config, tiny_dataset, tmp_path):
    header, records = tiny_dataset
    with pytest.raises(ConfigError, match="attention_layer"):
        Trainer(tiny_run_config.model_copy(update={"attention_layer": layer}), header, records, tmp_path)
