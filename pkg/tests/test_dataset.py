import json

import pytest
from pydantic import ValidationError

from src.core.exceptions import ConfigError, DatasetFormatError
from src.schemas.config import WorldConfig
from src.schemas.world import UtteranceRecord
from src.services.dataset_builder import DatasetBuilder, summarize
from src.repositories.dataset import DatasetRepository


def test_builder_is_deterministic(tiny_world, tiny_dataset, tmp_path):
    header, records = tiny_dataset
    again_header, again_records = DatasetBuilder(tiny_world).build()
    first = DatasetRepository(tmp_path / "a.jsonl").write(header, records)
    second = DatasetRepository(tmp_path / "b.jsonl").write(again_header, again_records)
    assert first.read_bytes() == second.read_bytes()


def test_seed_changes_the_dataset(tiny_world, tiny_dataset, tmp_path):
    header, records = tiny_dataset
    other = DatasetBuilder(tiny_world.model_copy(update={"seed": tiny_world.seed + 1})).build()
    first = DatasetRepository(tmp_path / "a.jsonl").write(header, records)
    second = DatasetRepository(tmp_path / "b.jsonl").write(*other)
    assert first.read_bytes() != second.read_bytes()


def test_splits_use_disjoint_scenes(tiny_dataset):
    header, records = tiny_dataset
    train_scenes = {sid for r in records if r.split == "train" for sid in r.scene_ids}
    eval_scenes = {sid for r in records if r.split == "eval" for sid in r.scene_ids}
    assert not train_scenes & eval_scenes
    assert header.counts["eval_scenes"] == 4


def test_record_shape(tiny_world, tiny_dataset):
    header, records = tiny_dataset
    assert [r.record_id for r in records] == list(range(len(records)))
    assert sum(r.split == "train" for r in records) == tiny_world.train_utterances
    for record in records:
        assert len(record.tokens) <= tiny_world.max_tokens
        assert all(len(view.detections) == tiny_world.num_objects for view in record.views)
        if record.kind == "pair":
            assert not record.spans and record.label is not None
        for span in record.spans:
            assert 1 <= span.start < span.end <= len(record.tokens)


def test_records_do_not_store_a_match_flag(tiny_dataset):
    # mismatched pairs only exist inside training batches
    _, records = tiny_dataset
    assert "match" not in records[0].model_dump()
    with pytest.raises(ValidationError):
        UtteranceRecord.model_validate({**records[0].model_dump(), "match": False})


def test_summary_counts(tiny_dataset):
    header, records = tiny_dataset
    summary = summarize(header, records)
    assert summary.utterances == len(records)
    assert sum(summary.kinds.values()) == len(records)
    assert summary.annotated == sum(1 for r in records if r.spans)
    assert abs(summary.span_coverage - 0.7) < 0.15


@pytest.mark.slow
def test_span_coverage_on_default_world():
    header, records = DatasetBuilder(WorldConfig()).build()
    assert abs(summarize(header, records).span_coverage - 0.7) < 0.03


def test_split_needs_two_scenes():
    config = WorldConfig(num_scenes=2, eval_scene_fraction=0.5, train_utterances=4, eval_utterances=4)
    with pytest.raises(ConfigError):
        DatasetBuilder(config).build()


# ----------------------------------------------------------------------
# persistence
# ----------------------------------------------------------------------
def test_write_then_read_is_identical(tiny_dataset, tmp_path):
    header, records = tiny_dataset
    repo = DatasetRepository(tmp_path / "dataset.jsonl")
    repo.write(header, records)
    read_header, read_records = repo.read()
    assert read_header == header
    assert read_records == records
    assert repo.read_header() == header


def test_empty_record_list(tiny_dataset, tmp_path):
    header, _ = tiny_dataset
    repo = DatasetRepository(tmp_path / "empty.jsonl")
    repo.write(header, [])
    assert repo.read() == (header, [])


def test_truncated_file_names_its_last_line(tiny_dataset, tmp_path):
    header, records = tiny_dataset
    path = DatasetRepository(tmp_path / "cut.jsonl").write(header, records[:5])
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 20])
    with pytest.raises(DatasetFormatError) as info:
        DatasetRepository(path).read()
    assert info.value.line == 6


def test_malformed_line_is_reported(tiny_dataset, tmp_path):
    header, records = tiny_dataset
    path = DatasetRepository(tmp_path / "bad.jsonl").write(header, records[:5])
    lines = path.read_text(encoding="utf-8").split("\n")
    lines[2] = "{not json"
    path.write_text("\n".join(lines), encoding="utf-8")
    with pytest.raises(DatasetFormatError) as info:
        DatasetRepository(path).read()
    assert info.value.line == 3


def test_invalid_record_is_reported(tiny_dataset, tmp_path):
    header, records = tiny_dataset
    path = DatasetRepository(tmp_path / "invalid.jsonl").write(header, records[:3])
    lines = path.read_text(encoding="utf-8").split("\n")
    record = json.loads(lines[1])
    record["tokens"] = [5, 6]
    lines[1] = json.dumps(record)
    path.write_text("\n".join(lines), encoding="utf-8")
    with pytest.raises(DatasetFormatError) as info:
        DatasetRepository(path).read()
    assert info.value.line == 2


def test_unsupported_format_version(tiny_dataset, tmp_path):
    header, records = tiny_dataset
    stale = header.model_copy(update={"format_version": header.format_version + 1})
    path = DatasetRepository(tmp_path / "old.jsonl").write(stale, records[:2])
    with pytest.raises(DatasetFormatError) as info:
        DatasetRepository(path).read()
    assert info.value.line == 1


def test_missing_file(tmp_path):
    with pytest.raises(DatasetFormatError):
        DatasetRepository(tmp_path / "nope.jsonl").read()
