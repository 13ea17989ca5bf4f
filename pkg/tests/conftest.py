"""Shared fixtures: micro model shapes, a tiny synthetic world and its dataset."""

import logging

import numpy as np
import pytest

from src.models.encoder import EncoderInputs
from src.models.model import AlignmentModel
from src.schemas.config import ModelConfig, RunConfig, WorldConfig
from src.services.dataset_builder import DatasetBuilder

MICRO_OVERRIDES = {"d": 8, "heads": 2, "lang_layers": 1, "vision_layers": 1, "cross_layers": 2, "ffn_mult": 2}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def reset_root_logger():
    """Commands install handlers bound to captured streams; drop them after each test."""
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def micro_config() -> ModelConfig:
    return ModelConfig(
        d=8,
        heads=2,
        lang_layers=1,
        vision_layers=1,
        cross_layers=2,
        max_tokens=6,
        num_objects=3,
        vocab_size=12,
        class_count=4,
        attribute_count=4,
        answer_count=5,
        feature_dim=5,
        ffn_mult=2,
    )


@pytest.fixture
def micro_model(micro_config) -> AlignmentModel:
    return AlignmentModel.initialize(micro_config, seed=7)


def random_boxes(rng: np.random.Generator, shape) -> np.ndarray:
    lo = rng.uniform(0.0, 0.5, size=tuple(shape) + (2,))
    size = rng.uniform(0.1, 0.5, size=tuple(shape) + (2,))
    return np.concatenate([lo, lo + size], axis=-1)


@pytest.fixture
def make_inputs(micro_config):
    """Factory for random encoder batches; ``lengths`` sets the real token count per row."""

    def factory(rng: np.random.Generator, batch: int = 2, lengths=None) -> EncoderInputs:
        n_tokens, n_objects = micro_config.max_tokens, micro_config.num_objects
        lengths = lengths or [n_tokens] * batch
        ids = rng.integers(3, micro_config.vocab_size, size=(batch, n_tokens))
        ids[:, 0] = 0
        mask = np.zeros((batch, n_tokens), dtype=bool)
        for row, length in enumerate(lengths):
            mask[row, :length] = True
            ids[row, length:] = 2
        return EncoderInputs(
            token_ids=ids,
            token_mask=mask,
            features=rng.normal(size=(batch, n_objects, micro_config.feature_dim)),
            boxes=random_boxes(rng, (batch, n_objects)),
        )

    return factory


@pytest.fixture(scope="session")
def tiny_world() -> WorldConfig:
    return WorldConfig(
        num_scenes=16,
        train_utterances=80,
        eval_utterances=16,
        eval_scene_fraction=0.25,
        num_shards=2,
        max_objects=3,
        num_objects=4,
        seed=3,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tiny_world):
    return DatasetBuilder(tiny_world).build()


@pytest.fixture
def tiny_run_config(tiny_world, tmp_path) -> RunConfig:
    return RunConfig(
        model_overrides=dict(MICRO_OVERRIDES),
        epochs=2,
        batch_size=16,
        warmup_steps=2,
        learning_rate=3e-3,
        world=tiny_world,
        dataset_path=str(tmp_path / "dataset.jsonl"),
        output_dir=str(tmp_path / "train"),
    )
