"""Turning dataset records into encoder batches with their supervision."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.core.exceptions import ShapeError
from src.models.encoder import EncoderInputs
from src.schemas.config import ModelConfig
from src.schemas.world import PAD_ID, DatasetHeader, SceneView, UtteranceRecord
from src.services.alignment_targets import AlignmentTarget, build_soft_targets
from src.services.embedding_table import EmbeddingTable
from src.services.objectives import ExampleInputs, MaskingPlan, apply_masking, draw_corruption

logger = logging.getLogger(__name__)


def example_from_view(tokens: Sequence[int], view: SceneView, max_tokens: int) -> ExampleInputs:
    """Pad ``tokens`` to ``max_tokens`` and stack the view's detections."""
    if len(tokens) > max_tokens:
        raise ShapeError(f"{len(tokens)} tokens exceed max_tokens={max_tokens}")
    ids = np.full(max_tokens, PAD_ID, dtype=np.int64)
    ids[: len(tokens)] = tokens
    mask = np.zeros(max_tokens, dtype=bool)
    mask[: len(tokens)] = True
    detections = view.detections
    return ExampleInputs(
        token_ids=ids,
        token_mask=mask,
        features=np.array([d.feature for d in detections], dtype=np.float64),
        boxes=np.array([d.box for d in detections], dtype=np.float64),
        class_labels=np.array([d.class_id for d in detections], dtype=np.int64),
        attribute_labels=np.array([d.attribute_id for d in detections], dtype=np.int64),
        background=np.array([d.background for d in detections], dtype=bool),
    )


def stack_examples(examples: Sequence[ExampleInputs]) -> EncoderInputs:
    return EncoderInputs(
        token_ids=np.stack([e.token_ids for e in examples]),
        token_mask=np.stack([e.token_mask for e in examples]),
        features=np.stack([e.features for e in examples]),
        boxes=np.stack([e.boxes for e in examples]),
    )


@dataclass
class PreparedRecord:
    """A record plus its alignment target against its own scene."""

    record: UtteranceRecord
    target: Optional[AlignmentTarget]

    @property
    def is_pair(self) -> bool:
        return self.record.kind == "pair"

    @property
    def is_question(self) -> bool:
        return self.record.kind == "question"


@dataclass
class Batch:
    """Encoder inputs for every row plus per-task row selections.

    Captions and questions occupy one row each, pair statements two.
    """

    inputs: EncoderInputs
    plan: MaskingPlan
    match_rows: np.ndarray
    match_labels: np.ndarray
    vqa_rows: np.ndarray
    vqa_labels: np.ndarray
    align_targets: np.ndarray  # (B, T, O), zero rows where invalid
    align_valid: np.ndarray  # (B, T)
    pair_rows: np.ndarray  # (P, 2)
    pair_labels: np.ndarray


class BatchBuilder:
    """Prepares records once (targets included) and assembles batches from them."""

    def __init__(self, header: DatasetHeader, table: EmbeddingTable, config: ModelConfig):
        self.header = header
        self.table = table
        self.config = config

    def prepare(self, records: Sequence[UtteranceRecord]) -> List[PreparedRecord]:
        prepared = []
        for record in records:
            target = None
            if record.spans and record.kind != "pair":
                words = [self.header.vocab[t] for t in record.tokens]
                target = build_soft_targets(
                    record.spans,
                    words,
                    record.views[0].detections,
                    self.table,
                    self.header.class_names,
                    self.header.attribute_names,
                    self.config.max_tokens,
                )
            prepared.append(PreparedRecord(record=record, target=target))
        return prepared

    def build(
        self,
        items: Sequence[PreparedRecord],
        rng: Optional[np.random.Generator],
        p_mask: float,
        p_corrupt: float = 0.0,
        pool: Optional[Sequence[SceneView]] = None,
        use_alignment: bool = True,
    ) -> Batch:
        """Assemble one batch.

        With probability ``p_corrupt`` a caption/question is paired with another
        scene from ``pool``; such rows train matching and masking only. With
        ``rng=None`` nothing is masked or corrupted.
        """
        n_tokens, n_objects = self.config.max_tokens, self.config.num_objects
        single = [item for item in items if not item.is_pair]
        corrupt = np.zeros(len(single), dtype=bool)
        if rng is not None and p_corrupt > 0.0 and pool:
            corrupt = draw_corruption(rng, len(single), p_corrupt)

        examples: List[ExampleInputs] = []
        plans: List[MaskingPlan] = []
        match_rows, match_labels, vqa_rows, vqa_labels = [], [], [], []
        pair_rows, pair_labels = [], []
        targets, valid = [], []
        single_index = 0

        for item in items:
            record = item.record
            if item.is_pair:
                views = list(record.views)
                is_match = True
            else:
                view = record.views[0]
                if corrupt[single_index]:
                    view = self._replacement(view, pool, rng)
                single_index += 1
                is_match = view is record.views[0]
                views = [view]

            rows = []
            for view in views:
                row = len(examples)
                example = example_from_view(record.tokens, view, n_tokens)
                if example.features.shape != (n_objects, self.config.feature_dim):
                    raise ShapeError(
                        f"record {record.record_id}: detections have shape {example.features.shape}, "
                        f"model expects {(n_objects, self.config.feature_dim)}"
                    )
                if rng is not None:
                    example, plan = apply_masking(example, rng, p_mask, row=row)
                    plans.append(plan)
                examples.append(example)
                rows.append(row)

                has_target = use_alignment and is_match and item.target is not None
                targets.append(item.target.matrix if has_target else np.zeros((n_tokens, n_objects)))
                valid.append(item.target.valid if has_target else np.zeros(n_tokens, dtype=bool))

            if item.is_pair:
                pair_rows.append(rows)
                pair_labels.append(float(record.label))
                continue
            match_rows.append(rows[0])
            match_labels.append(1.0 if is_match else 0.0)
            if item.is_question and is_match:
                vqa_rows.append(rows[0])
                vqa_labels.append(record.answer)

        plan = MaskingPlan.merge(plans) if plans else MaskingPlan.empty(self.config.feature_dim)
        return Batch(
            inputs=stack_examples(examples),
            plan=plan,
            match_rows=np.asarray(match_rows, dtype=np.int64),
            match_labels=np.asarray(match_labels, dtype=np.float64),
            vqa_rows=np.asarray(vqa_rows, dtype=np.int64),
            vqa_labels=np.asarray(vqa_labels, dtype=np.int64),
            align_targets=np.stack(targets),
            align_valid=np.stack(valid),
            pair_rows=np.asarray(pair_rows, dtype=np.int64).reshape(-1, 2),
            pair_labels=np.asarray(pair_labels, dtype=np.float64),
        )

    @staticmethod
    def _replacement(view: SceneView, pool: Sequence[SceneView], rng: np.random.Generator) -> SceneView:
        """A different scene from ``pool``, drawn uniformly; ``view`` itself if there is none."""
        others = [v for v in pool if v.scene.scene_id != view.scene.scene_id]
        if not others:
            return view
        return others[int(rng.integers(len(others)))]


def scene_pool(records: Sequence[UtteranceRecord]) -> List[SceneView]:
    """Distinct scene views referenced by ``records``, ordered by scene id."""
    seen: Dict[int, SceneView] = {}
    for record in records:
        for view in record.views:
            seen.setdefault(view.scene.scene_id, view)
    return [seen[k] for k in sorted(seen)]
