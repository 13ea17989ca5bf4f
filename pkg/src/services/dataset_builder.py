"""Deterministic dataset generation: scenes, detections, utterances."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.core.config import settings
from src.core.exceptions import ConfigError
from src.schemas.config import WorldConfig
from src.schemas.world import DatasetHeader, SceneView, UtteranceRecord
from src.services.embedding_table import EmbeddingTable, build_embedding_table
from src.services.language import CAPTION, PAIR, QUESTION, Language, generate_utterance
from src.services.world import generate_scene, simulate_detector
from src.utils.rng import derive_seed, make_rng

logger = logging.getLogger(__name__)

# stream tags mixed into derive_seed so no two random streams coincide
SCENE_STREAM = 1
DETECTOR_STREAM = 2
SPLIT_STREAM = 3
SHARD_STREAM = 4
EMBEDDING_STREAM = 5
SPLITS = ("train", "eval")


@dataclass
class DatasetSummary:
    scenes: int
    train_scenes: int
    eval_scenes: int
    utterances: int
    train: int
    eval: int
    annotated: int
    kinds: Dict[str, int]

    @property
    def span_coverage(self) -> float:
        return self.annotated / self.utterances if self.utterances else 0.0

    def as_dict(self) -> Dict:
        return {
            "scenes": self.scenes,
            "train_scenes": self.train_scenes,
            "eval_scenes": self.eval_scenes,
            "utterances": self.utterances,
            "train": self.train,
            "eval": self.eval,
            "annotated": self.annotated,
            "span_coverage": round(self.span_coverage, 4),
            "kinds": dict(self.kinds),
        }


def summarize(header: DatasetHeader, records: Sequence[UtteranceRecord]) -> DatasetSummary:
    kinds = {CAPTION: 0, QUESTION: 0, PAIR: 0}
    for record in records:
        kinds[record.kind] += 1
    return DatasetSummary(
        scenes=header.counts.get("scenes", 0),
        train_scenes=header.counts.get("train_scenes", 0),
        eval_scenes=header.counts.get("eval_scenes", 0),
        utterances=len(records),
        train=sum(1 for r in records if r.split == "train"),
        eval=sum(1 for r in records if r.split == "eval"),
        annotated=sum(1 for r in records if r.spans),
        kinds=kinds,
    )


def embedding_table_for(header: DatasetHeader) -> EmbeddingTable:
    return build_embedding_table(header.synonym_clusters, header.embedding_seed, header.embedding_dim)


class DatasetBuilder:
    """Builds the full dataset for one ``WorldConfig``.

    Scenes are split into train/eval before any utterance is written, so
    evaluation sentences describe unseen scenes. Utterances are generated in
    ``num_shards`` independently seeded shards per split and concatenated in
    shard order.
    """

    def __init__(self, config: WorldConfig):
        self.config = config
        self.language = Language(config)

    def header(self, counts: Dict[str, int]) -> DatasetHeader:
        return DatasetHeader(
            format_version=settings.DATASET_FORMAT_VERSION,
            world_config=self.config,
            vocab=self.language.vocab,
            class_names=self.language.class_names,
            attribute_names=self.language.attribute_names,
            answers=self.language.answers,
            synonym_clusters=self.language.clusters(),
            embedding_seed=derive_seed(self.config.seed, EMBEDDING_STREAM),
            embedding_dim=self.config.embedding_dim,
            counts=counts,
        )

    def build_scenes(self) -> List[SceneView]:
        views = []
        for scene_id in range(self.config.num_scenes):
            scene = generate_scene(derive_seed(self.config.seed, SCENE_STREAM, scene_id), self.config, scene_id)
            detections = simulate_detector(scene, self.config, derive_seed(self.config.seed, DETECTOR_STREAM, scene_id))
            views.append(SceneView(scene=scene, detections=detections))
        return views

    def split_scenes(self, views: List[SceneView]) -> Dict[str, List[SceneView]]:
        order = make_rng(self.config.seed, SPLIT_STREAM).permutation(len(views))
        eval_count = int(round(self.config.eval_scene_fraction * len(views)))
        eval_ids = set(order[:eval_count].tolist())
        split = {
            "train": [v for v in views if v.scene.scene_id not in eval_ids],
            "eval": [v for v in views if v.scene.scene_id in eval_ids],
        }
        for name, count in (("train", self.config.train_utterances), ("eval", self.config.eval_utterances)):
            if count and len(split[name]) < 2:
                raise ConfigError(f"world.{name} split has {len(split[name])} scenes; at least 2 are needed")
        return split

    def build_shard(self, views: List[SceneView], split: str, shard: int, count: int) -> List[UtteranceRecord]:
        """``count`` records of one split; record ids are assigned later."""
        split_index = SPLITS.index(split)
        rng = make_rng(self.config.seed, SHARD_STREAM, split_index, shard)
        records = []
        for _ in range(count):
            annotate = bool(rng.random() < self.config.annotation_rate)
            kinds = (CAPTION, QUESTION) if annotate else (CAPTION, QUESTION, PAIR)
            kind = kinds[int(rng.integers(len(kinds)))]
            if kind == PAIR:
                picked = rng.choice(len(views), size=2, replace=False)
                chosen = [views[int(i)] for i in picked]
            else:
                chosen = [views[int(rng.integers(len(views)))]]
            seed = int(rng.integers(0, 2**63 - 1))
            records.append(generate_utterance(chosen, kind, seed, self.language, annotate=annotate, split=split))
        return records

    def build(self) -> Tuple[DatasetHeader, List[UtteranceRecord]]:
        logger.info(
            f"🚀 Generating dataset: {self.config.num_scenes} scenes, "
            f"{self.config.train_utterances}+{self.config.eval_utterances} utterances, seed {self.config.seed}"
        )
        views = self.build_scenes()
        split = self.split_scenes(views)

        records: List[UtteranceRecord] = []
        for name, total in (("train", self.config.train_utterances), ("eval", self.config.eval_utterances)):
            for shard, count in enumerate(np.array_split(np.arange(total), self.config.num_shards)):
                shard_records = self.build_shard(split[name], name, shard, len(count))
                logger.debug(f"{name} shard {shard}: {len(shard_records)} records")
                records.extend(shard_records)
        records = [record.model_copy(update={"record_id": i}) for i, record in enumerate(records)]

        counts = {
            "scenes": len(views),
            "train_scenes": len(split["train"]),
            "eval_scenes": len(split["eval"]),
            "train": self.config.train_utterances,
            "eval": self.config.eval_utterances,
        }
        header = self.header(counts)
        summary = summarize(header, records)
        logger.info(f"✅ Dataset ready: {summary.utterances} utterances, span coverage {summary.span_coverage:.3f}")
        return header, records
