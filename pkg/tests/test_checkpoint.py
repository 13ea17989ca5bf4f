import json

import numpy as np
import pytest

from src.core.exceptions import CheckpointError
from src.repositories.checkpoint import CheckpointRepository
from src.services.batching import BatchBuilder
from src.services.dataset_builder import DatasetBuilder, embedding_table_for
from src.services.evaluator import Evaluator, check_model_matches
from src.services.trainer import CHECKPOINT_FILE, Trainer


@pytest.fixture
def trained(tiny_run_config, tiny_dataset):
    header, records = tiny_dataset
    config = tiny_run_config.model_copy(update={"epochs": 1, "vqa_start_epoch": 0})
    return Trainer(config, header, records).run()


def test_round_trip_restores_everything(trained, tiny_run_config):
    path = trained.output_dir / CHECKPOINT_FILE
    loaded = CheckpointRepository(path).load()

    assert loaded.epoch == 1
    assert loaded.model.config == trained.model.config
    assert loaded.run_config.seed == tiny_run_config.seed
    assert loaded.run_config.epochs == 1
    for name, param in trained.model.params.items():
        np.testing.assert_array_equal(loaded.model.params[name].data, param.data)

    assert loaded.optimizer is not None
    assert loaded.optimizer.step == trained.steps
    stored = json.loads(path.read_text(encoding="utf-8"))["optimizer"]
    assert set(stored["first_moment"]) == set(loaded.optimizer.first_moment)
    for name, moment in loaded.optimizer.second_moment.items():
        assert moment.shape == trained.model.params[name].data.shape


def test_reloaded_model_evaluates_identically(trained, tiny_dataset):
    header, records = tiny_dataset
    loaded = CheckpointRepository(trained.output_dir / CHECKPOINT_FILE).load()
    builder = BatchBuilder(header, embedding_table_for(header), loaded.model.config)
    items = builder.prepare([r for r in records if r.split == "eval"])
    report = Evaluator(loaded.model, builder, loaded.run_config).evaluate(items, split="eval", epoch=0)
    assert report == trained.final_report


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        CheckpointRepository(tmp_path / "none.json").load()


def test_malformed_checkpoint(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(CheckpointError):
        CheckpointRepository(path).load()


def test_unsupported_checkpoint_version(trained, tmp_path):
    raw = json.loads((trained.output_dir / CHECKPOINT_FILE).read_text(encoding="utf-8"))
    raw["format_version"] = 99
    path = tmp_path / "future.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    with pytest.raises(CheckpointError, match="format 99"):
        CheckpointRepository(path).load()


def test_parameter_shape_mismatch(trained, tmp_path):
    raw = json.loads((trained.output_dir / CHECKPOINT_FILE).read_text(encoding="utf-8"))
    name = sorted(raw["parameters"])[0]
    raw["parameters"][name] = {"shape": [1], "data": [0.0]}
    path = tmp_path / "reshaped.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    with pytest.raises(CheckpointError, match="shape"):
        CheckpointRepository(path).load()


def test_model_must_fit_dataset(trained, tiny_world):
    other_header, _ = DatasetBuilder(tiny_world.model_copy(update={"num_objects": 5})).build()
    with pytest.raises(CheckpointError, match="num_objects"):
        check_model_matches(trained.model, other_header)
