"""Training objectives: masking, matching, VQA, pair comparison, alignment and their sum."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.exceptions import InvalidInputError, ShapeError
from src.models.encoder import EncoderOutput
from src.models.heads import (
    AlignmentPrediction,
    attribute_logits,
    class_logits,
    feature_regression,
    match_logit,
    pair_logit,
    vocab_logits,
    vqa_logits,
)
from src.models.params import ParameterStore
from src.numeric.functional import binary_cross_entropy_with_logits, cross_entropy, kl_divergence, mse
from src.numeric.tensor import Tensor
from src.schemas.config import LOSS_NAMES
from src.schemas.world import CLS_ID, MASK_ID, PAD_ID

logger = logging.getLogger(__name__)


@dataclass
class ExampleInputs:
    """One encoder row before batching. Labels are the detector's predictions."""

    token_ids: np.ndarray  # (T,) padded with [PAD]
    token_mask: np.ndarray  # (T,) bool
    features: np.ndarray  # (O, feature_dim)
    boxes: np.ndarray  # (O, 4)
    class_labels: np.ndarray  # (O,)
    attribute_labels: np.ndarray  # (O,)
    background: np.ndarray  # (O,) bool


@dataclass
class MaskingPlan:
    """Ground truth for every masked word and object, keyed by batch row."""

    word_rows: np.ndarray
    word_positions: np.ndarray
    word_ids: np.ndarray
    object_rows: np.ndarray
    object_indices: np.ndarray
    class_labels: np.ndarray
    attribute_labels: np.ndarray
    features: np.ndarray  # (n_objects, feature_dim)

    @classmethod
    def empty(cls, feature_dim: int) -> "MaskingPlan":
        none = np.zeros(0, dtype=np.int64)
        return cls(none, none, none, none, none, none, none, np.zeros((0, feature_dim)))

    @classmethod
    def merge(cls, plans: Sequence["MaskingPlan"]) -> "MaskingPlan":
        if not plans:
            raise InvalidInputError("cannot merge an empty list of masking plans")
        return cls(
            *(np.concatenate([getattr(p, name) for p in plans]) for name in (
                "word_rows", "word_positions", "word_ids", "object_rows", "object_indices",
                "class_labels", "attribute_labels",
            )),
            features=np.concatenate([p.features for p in plans], axis=0),
        )

    @property
    def word_count(self) -> int:
        return int(self.word_positions.size)

    @property
    def object_count(self) -> int:
        return int(self.object_indices.size)

    @property
    def is_empty(self) -> bool:
        return self.word_count == 0 and self.object_count == 0


def apply_masking(
    example: ExampleInputs, rng: np.random.Generator, p_mask: float, row: int = 0
) -> Tuple[ExampleInputs, MaskingPlan]:
    """Mask each real word and each foreground object independently with ``p_mask``.

    Masked words become [MASK]; masked objects get a zero feature vector and
    keep their box. [CLS], padding and background detections are never
    candidates. One uniform draw is taken per token slot and per object slot
    whatever ``p_mask`` is, so plans stay aligned across settings.
    """
    ids = np.asarray(example.token_ids, dtype=np.int64)
    word_candidates = example.token_mask & (ids != CLS_ID) & (ids != PAD_ID)
    word_candidates[0] = False
    object_candidates = ~np.asarray(example.background, dtype=bool)

    word_hits = (rng.random(ids.shape[0]) < p_mask) & word_candidates
    object_hits = (rng.random(example.features.shape[0]) < p_mask) & object_candidates

    positions = np.flatnonzero(word_hits)
    objects = np.flatnonzero(object_hits)
    plan = MaskingPlan(
        word_rows=np.full(positions.size, row, dtype=np.int64),
        word_positions=positions,
        word_ids=ids[positions],
        object_rows=np.full(objects.size, row, dtype=np.int64),
        object_indices=objects,
        class_labels=np.asarray(example.class_labels, dtype=np.int64)[objects],
        attribute_labels=np.asarray(example.attribute_labels, dtype=np.int64)[objects],
        features=np.asarray(example.features, dtype=np.float64)[objects],
    )

    masked_ids = ids.copy()
    masked_ids[positions] = MASK_ID
    masked_features = np.array(example.features, dtype=np.float64)
    masked_features[objects] = 0.0
    return replace(example, token_ids=masked_ids, features=masked_features), plan


def draw_corruption(rng: np.random.Generator, count: int, p_corrupt: float) -> np.ndarray:
    """Which of ``count`` pairs get their image swapped for another scene's."""
    return rng.random(count) < p_corrupt


def masking_losses(output: EncoderOutput, plan: MaskingPlan, params: ParameterStore) -> Dict[str, Optional[Tensor]]:
    """Masked-word CE, masked-object class/attribute CE and feature MSE.

    A term whose part of the plan is empty is ``None`` (inactive).
    """
    losses: Dict[str, Optional[Tensor]] = {"lang_mask": None, "vis_class": None, "vis_attr": None, "vis_feat": None}
    if plan.word_count:
        words = output.words[plan.word_rows, plan.word_positions]
        losses["lang_mask"] = cross_entropy(vocab_logits(words, params), plan.word_ids)
    if plan.object_count:
        objects = output.objects[plan.object_rows, plan.object_indices]
        losses["vis_class"] = cross_entropy(class_logits(objects, params), plan.class_labels)
        losses["vis_attr"] = cross_entropy(attribute_logits(objects, params), plan.attribute_labels)
        losses["vis_feat"] = mse(feature_regression(objects, params), plan.features)
    return losses


def matching_loss(cls: Tensor, is_match: np.ndarray, params: ParameterStore) -> Tensor:
    """BCE of the match head on [CLS] rows; label 1 means the pair is genuine."""
    logits = match_logit(cls, params)
    return binary_cross_entropy_with_logits(logits, np.asarray(is_match, dtype=np.float64).reshape(logits.shape))


def vqa_loss(cls: Tensor, answers: np.ndarray, params: ParameterStore, eps: float = 1e-5) -> Tensor:
    """CE over the closed answer set; an out-of-range label is an error."""
    logits = vqa_logits(cls, params, eps)
    return cross_entropy(logits, np.asarray(answers, dtype=np.int64).reshape(logits.shape[:-1]))


def pair_comparison_head(cls_1: Tensor, cls_2: Tensor, labels: np.ndarray, params: ParameterStore) -> Tensor:
    """BCE of the pair head over ``[cls_1; cls_2]`` (order matters)."""
    logits = pair_logit(cls_1, cls_2, params)
    return binary_cross_entropy_with_logits(logits, np.asarray(labels, dtype=np.float64).reshape(logits.shape))


def alignment_loss(pred: AlignmentPrediction, targets: np.ndarray, valid: np.ndarray) -> Optional[Tensor]:
    """Mean KL(target || prediction) over valid word rows; ``None`` when no row is valid.

    Entries outside the top-k support carry no gradient; the KL floor keeps
    target mass there finite.
    """
    targets = np.asarray(targets, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if targets.shape != pred.probs.shape:
        raise ShapeError(f"alignment target shape {targets.shape} does not match prediction {pred.probs.shape}")
    if valid.shape != targets.shape[:-1]:
        raise ShapeError(f"validity mask shape {valid.shape} does not match target rows {targets.shape[:-1]}")
    if not valid.any():
        return None
    index = np.nonzero(valid)
    return kl_divergence(targets[index], pred.probs[index]).mean()


@dataclass
class LossBundle:
    """Active loss terms, their weights and the weighted total."""

    terms: Dict[str, Tensor]
    weights: Dict[str, float]
    total: Tensor
    inactive: Tuple[str, ...] = field(default_factory=tuple)

    def values(self) -> Dict[str, float]:
        return {name: term.item() for name, term in self.terms.items()}

    def __contains__(self, name: str) -> bool:
        return name in self.terms


def total_loss(
    parts: Mapping[str, Optional[Tensor]],
    weights: Mapping[str, float],
    epoch: Optional[int] = None,
    vqa_start_epoch: int = 0,
    is_match: bool = True,
) -> LossBundle:
    """Weighted sum of the active terms.

    ``vqa`` is dropped before ``vqa_start_epoch``; ``vqa`` and ``align`` are
    dropped for mismatched pairs. ``None`` parts are inactive.
    """
    unknown = set(parts) - set(LOSS_NAMES)
    if unknown:
        raise InvalidInputError(f"unknown loss terms: {sorted(unknown)}")

    disabled = set()
    if epoch is not None and epoch < vqa_start_epoch:
        disabled.add("vqa")
    if not is_match:
        disabled.update(("vqa", "align"))

    terms: Dict[str, Tensor] = {}
    for name in LOSS_NAMES:
        term = parts.get(name)
        if term is None or name in disabled:
            continue
        if term.size != 1:
            raise ShapeError(f"loss term {name!r} is not a scalar (shape {term.shape})")
        terms[name] = term
    if not terms:
        raise InvalidInputError("no active loss terms")

    used = {name: float(weights.get(name, 1.0)) for name in terms}
    total: Optional[Tensor] = None
    for name, term in terms.items():
        weighted = term * used[name]
        total = weighted if total is None else total + weighted
    inactive = tuple(name for name in LOSS_NAMES if name not in terms)
    return LossBundle(terms=terms, weights=used, total=total, inactive=inactive)
