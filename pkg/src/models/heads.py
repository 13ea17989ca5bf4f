"""Task heads on top of the encoder and the alignment decoder."""

import math
from dataclasses import dataclass

import numpy as np

from src.models.encoder import apply_linear, apply_norm, feed_forward
from src.models.params import ParameterStore
from src.numeric.functional import topk_softmax
from src.numeric.tensor import Tensor, concat
from src.schemas.config import ModelConfig


@dataclass
class AlignmentPrediction:
    """Word x object alignment. ``probs`` rows are top-k softmaxes."""

    scores: Tensor  # (B, T, O) scaled dot products
    probs: Tensor  # (B, T, O)
    support: np.ndarray  # (B, T, O) bool, kept entries
    k: int


def init_head_params(store: ParameterStore, config: ModelConfig) -> None:
    d = config.d
    store.linear("head.vocab", d, config.vocab_size)
    store.linear("head.class", d, config.class_count)
    store.linear("head.attr", d, config.attribute_count)
    store.linear("head.feat", d, config.feature_dim)
    store.linear("head.match", d, 1)
    store.linear("head.vqa.hidden", d, d)
    store.norm("head.vqa.ln", d)
    store.linear("head.vqa.out", d, config.answer_count)
    store.linear("head.pair", 2 * d, 1)
    for side in ("s", "o"):
        store.linear(f"align.ff_{side}.in", d, d)
        store.linear(f"align.ff_{side}.out", d, d)
        store.norm(f"align.ln_{side}", d)


def vocab_logits(words: Tensor, params: ParameterStore) -> Tensor:
    return apply_linear(words, params, "head.vocab")


def class_logits(objects: Tensor, params: ParameterStore) -> Tensor:
    return apply_linear(objects, params, "head.class")


def attribute_logits(objects: Tensor, params: ParameterStore) -> Tensor:
    return apply_linear(objects, params, "head.attr")


def feature_regression(objects: Tensor, params: ParameterStore) -> Tensor:
    return apply_linear(objects, params, "head.feat")


def match_logit(cls: Tensor, params: ParameterStore) -> Tensor:
    """One logit per row of ``cls`` (shape (..., d) -> (...))."""
    out = apply_linear(cls, params, "head.match")
    return out.reshape(out.shape[:-1])


def vqa_logits(cls: Tensor, params: ParameterStore, eps: float = 1e-5) -> Tensor:
    hidden = apply_norm(apply_linear(cls, params, "head.vqa.hidden").relu(), params, "head.vqa.ln", eps)
    return apply_linear(hidden, params, "head.vqa.out")


def pair_logit(cls_1: Tensor, cls_2: Tensor, params: ParameterStore) -> Tensor:
    """Logit over the ordered concatenation ``[cls_1; cls_2]``."""
    out = apply_linear(concat([cls_1, cls_2], axis=-1), params, "head.pair")
    return out.reshape(out.shape[:-1])


def alignment_decoder(objects: Tensor, words: Tensor, params: ParameterStore, k: int, eps: float = 1e-5) -> AlignmentPrediction:
    """Project O', S' into a joint space, score every word/object pair, keep top-k per word.

    Each modality has its own residual feed-forward projection followed by
    layer norm. ``k`` larger than the object count is clamped.
    """
    d = words.shape[-1]
    o_hat = apply_norm(objects + feed_forward(objects, params, "align.ff_o"), params, "align.ln_o", eps)
    s_hat = apply_norm(words + feed_forward(words, params, "align.ff_s"), params, "align.ln_s", eps)
    scores = (s_hat @ o_hat.swapaxes(-1, -2)) * (1.0 / math.sqrt(d))
    k = min(k, objects.shape[-2])
    probs, support = topk_softmax(scores, k)
    return AlignmentPrediction(scores=scores, probs=probs, support=support, k=k)
