"""Model configuration resolution and the shared forward-plus-loss pass."""

from typing import Mapping, Optional, Tuple

import numpy as np

from src.core.exceptions import ConfigError
from src.models.encoder import EncoderOutput
from src.models.heads import AlignmentPrediction, alignment_decoder
from src.models.model import AlignmentModel
from src.schemas.config import ModelConfig, RunConfig
from src.schemas.world import DatasetHeader
from src.services.batching import Batch
from src.services.objectives import (
    LossBundle,
    alignment_loss,
    masking_losses,
    matching_loss,
    pair_comparison_head,
    total_loss,
    vqa_loss,
)


def resolve_model_config(run_config: RunConfig, header: DatasetHeader) -> ModelConfig:
    """Preset and overrides, with every data-dependent size taken from the dataset."""
    world = header.world_config
    model_config = run_config.base_model_config(
        vocab_size=len(header.vocab),
        class_count=len(header.class_names),
        attribute_count=len(header.attribute_names),
        answer_count=len(header.answers),
        feature_dim=world.feature_dim,
        max_tokens=world.max_tokens,
        num_objects=world.num_objects,
    )
    resolve_attention_layer(run_config, model_config)
    return model_config


def resolve_attention_layer(run_config: RunConfig, model_config: ModelConfig) -> int:
    """Configured inter-modality layer for attention metrics; default is the penultimate one."""
    if run_config.attention_layer is None:
        return max(model_config.cross_layers - 2, 0)
    if not 0 <= run_config.attention_layer < model_config.cross_layers:
        raise ConfigError(
            f"attention_layer: {run_config.attention_layer} is out of range 0..{model_config.cross_layers - 1}"
        )
    return run_config.attention_layer


def compute_losses(
    model: AlignmentModel,
    batch: Batch,
    top_k: int,
    weights: Mapping[str, float],
    epoch: Optional[int] = None,
    vqa_start_epoch: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[LossBundle, EncoderOutput, Optional[AlignmentPrediction]]:
    """Forward pass plus every applicable loss term for one batch."""
    params = model.params
    output = model.encode(batch.inputs, rng)
    parts = dict(masking_losses(output, batch.plan, params))
    cls = output.cls

    if batch.match_rows.size:
        parts["match"] = matching_loss(cls[batch.match_rows], batch.match_labels, params)
    if batch.vqa_rows.size:
        parts["vqa"] = vqa_loss(cls[batch.vqa_rows], batch.vqa_labels, params, model.config.layer_norm_eps)
    prediction = None
    if batch.align_valid.any():
        prediction = alignment_decoder(output.objects, output.words, params, top_k, model.config.layer_norm_eps)
        parts["align"] = alignment_loss(prediction, batch.align_targets, batch.align_valid)
    if batch.pair_rows.size:
        parts["pair"] = pair_comparison_head(
            cls[batch.pair_rows[:, 0]], cls[batch.pair_rows[:, 1]], batch.pair_labels, params
        )

    bundle = total_loss(parts, weights, epoch=epoch, vqa_start_epoch=vqa_start_epoch)
    return bundle, output, prediction


