"""Evaluation metrics on genuine (uncorrupted) pairs."""

import logging
from collections import defaultdict
from typing import Dict, Optional, Sequence

import numpy as np

from src.core.exceptions import CheckpointError
from src.models.encoder import CROSS_LANG_FROM_VISION
from src.models.heads import alignment_decoder, match_logit, pair_logit, vqa_logits
from src.models.model import AlignmentModel
from src.numeric.functional import kl_divergence
from src.schemas.config import RunConfig
from src.schemas.metrics import MetricsReport
from src.schemas.world import DatasetHeader
from src.services.batching import BatchBuilder, PreparedRecord
from src.services.pipeline import compute_losses, resolve_attention_layer
from src.utils.rng import make_rng

logger = logging.getLogger(__name__)

EVAL_MASK_SEED = 20_240_601
EVAL_BATCH_SIZE = 64


def check_model_matches(model: AlignmentModel, header: DatasetHeader) -> None:
    """The dataset must produce inputs of the shapes the model was built for."""
    config = model.config
    world = header.world_config
    expected = {
        "vocab_size": len(header.vocab),
        "class_count": len(header.class_names),
        "attribute_count": len(header.attribute_names),
        "answer_count": len(header.answers),
        "feature_dim": world.feature_dim,
        "max_tokens": world.max_tokens,
        "num_objects": world.num_objects,
    }
    mismatched = [f"{k}: model {getattr(config, k)} vs dataset {v}" for k, v in expected.items() if getattr(config, k) != v]
    if mismatched:
        raise CheckpointError("checkpoint does not fit the dataset (" + "; ".join(mismatched) + ")")


def _ratio(hits: float, total: int) -> Optional[float]:
    return float(hits) / total if total else None


def _clip(value: Optional[float]) -> Optional[float]:
    return None if value is None else min(value, 1.0)


class Evaluator:
    """Computes a :class:`MetricsReport` for a list of prepared records."""

    def __init__(self, model: AlignmentModel, builder: BatchBuilder, run_config: RunConfig):
        self.model = model
        self.builder = builder
        self.run_config = run_config
        self.layer = resolve_attention_layer(run_config, model.config)

    def evaluate(self, items: Sequence[PreparedRecord], split: str, epoch: int) -> MetricsReport:
        params = self.model.params
        eps = self.model.config.layer_norm_eps
        top_k = self.run_config.top_k
        weights = self.run_config.loss_weights.as_dict()

        qa_hits = match_hits = pair_hits = 0
        recall_hits = 0
        attention_mass = 0.0
        kl_sum = 0.0
        counts = defaultdict(int)
        loss_sums: Dict[str, float] = defaultdict(float)
        loss_batches: Dict[str, int] = defaultdict(int)

        for start in range(0, len(items), EVAL_BATCH_SIZE):
            chunk = list(items[start:start + EVAL_BATCH_SIZE])
            batch = self.builder.build(chunk, rng=None, p_mask=0.0)
            output = self.model.encode(batch.inputs)
            cls = output.cls

            if batch.vqa_rows.size:
                predicted = vqa_logits(cls[batch.vqa_rows], params, eps).data.argmax(axis=-1)
                qa_hits += int(np.sum(predicted == batch.vqa_labels))
                counts["questions"] += int(batch.vqa_rows.size)
            if batch.match_rows.size:
                logits = match_logit(cls[batch.match_rows], params).data
                match_hits += int(np.sum((logits > 0.0) == (batch.match_labels > 0.5)))
                counts["matches"] += int(batch.match_rows.size)
            if batch.pair_rows.size:
                logits = pair_logit(cls[batch.pair_rows[:, 0]], cls[batch.pair_rows[:, 1]], params).data
                pair_hits += int(np.sum((logits > 0.0) == (batch.pair_labels > 0.5)))
                counts["pairs"] += int(batch.pair_rows.size // 2)

            valid = batch.align_valid
            if valid.any():
                rows, words = np.nonzero(valid)
                target_argmax = batch.align_targets[rows, words].argmax(axis=-1)
                attention = output.traces[CROSS_LANG_FROM_VISION][self.layer]  # (B, H, T, O)
                summed = attention.sum(axis=1)[rows, words]
                recall_hits += int(np.sum(summed.argmax(axis=-1) == target_argmax))
                mean_heads = attention.mean(axis=1)[rows, words]
                attention_mass += float(mean_heads[np.arange(rows.size), target_argmax].sum())

                prediction = alignment_decoder(output.objects, output.words, params, top_k, eps)
                kl_sum += float(kl_divergence(batch.align_targets[rows, words], prediction.probs[rows, words]).data.sum())
                counts["aligned_words"] += int(rows.size)

            # losses use a fixed masking draw, no corruption and VQA switched on
            loss_batch = self.builder.build(
                chunk,
                make_rng(EVAL_MASK_SEED, start),
                p_mask=self.run_config.p_mask,
                use_alignment=self.run_config.use_alignment,
            )
            bundle, _, _ = compute_losses(self.model, loss_batch, top_k, weights)
            for name, value in bundle.values().items():
                loss_sums[name] += value
                loss_batches[name] += 1
            counts["examples"] += len(chunk)

        aligned = counts["aligned_words"]
        report = MetricsReport(
            split=split,
            epoch=epoch,
            examples=counts["examples"],
            qa_accuracy=_ratio(qa_hits, counts["questions"]),
            match_accuracy=_ratio(match_hits, counts["matches"]),
            pair_accuracy=_ratio(pair_hits, counts["pairs"]),
            alignment_recall=_ratio(recall_hits, aligned),
            attention_target_mass=_clip(_ratio(attention_mass, aligned)),
            alignment_kl=_ratio(kl_sum, aligned),
            losses={name: loss_sums[name] / loss_batches[name] for name in loss_sums},
            counts=dict(counts),
        )
        logger.debug(f"Evaluated {report.examples} {split} records at epoch {epoch}")
        return report
