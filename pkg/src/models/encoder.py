"""Input embeddings and the stacked intra-/inter-modality transformer."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.core.exceptions import InvalidInputError, ShapeError
from src.models.params import ParameterStore
from src.numeric.functional import dropout, layer_norm, linear, softmax
from src.numeric.tensor import Tensor
from src.schemas.config import ModelConfig
from src.utils.validators import validate_boxes

BOX_FEATURES = 7

LANG_SELF = "lang_self"
VISION_SELF = "vision_self"
CROSS_LANG_FROM_VISION = "cross_lang_from_vision"
CROSS_VISION_FROM_LANG = "cross_vision_from_lang"
CROSS_LANG_SELF = "cross_lang_self"
CROSS_VISION_SELF = "cross_vision_self"
TRACE_KEYS = (
    LANG_SELF, VISION_SELF, CROSS_LANG_FROM_VISION, CROSS_VISION_FROM_LANG, CROSS_LANG_SELF, CROSS_VISION_SELF,
)


@dataclass
class EncoderInputs:
    """One batch of (sentence, detections) pairs, batch axis first."""

    token_ids: np.ndarray  # (B, T) int
    token_mask: np.ndarray  # (B, T) bool, False on padding
    features: np.ndarray  # (B, O, feature_dim)
    boxes: np.ndarray  # (B, O, 4)
    object_mask: Optional[np.ndarray] = None  # (B, O) bool

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64)
        self.token_mask = np.asarray(self.token_mask, dtype=bool)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.boxes = np.asarray(self.boxes, dtype=np.float64)
        if self.object_mask is None:
            self.object_mask = np.ones(self.boxes.shape[:2], dtype=bool)
        else:
            self.object_mask = np.asarray(self.object_mask, dtype=bool)
        if self.token_ids.shape != self.token_mask.shape:
            raise ShapeError("token ids and token mask shapes differ")
        if self.features.shape[:2] != self.boxes.shape[:2]:
            raise ShapeError("features and boxes disagree on the object count")


@dataclass
class EncoderOutput:
    """Updated embeddings O', S' and every recorded attention map.

    ``traces[key][layer]`` has shape (B, H, N_query, N_key).
    """

    objects: Tensor  # (B, O, d)
    words: Tensor  # (B, T, d)
    traces: Dict[str, List[np.ndarray]] = field(default_factory=dict)

    @property
    def cls(self) -> Tensor:
        return self.words[:, 0, :]


# ----------------------------------------------------------------------
# parameters
# ----------------------------------------------------------------------
def _attention_params(store: ParameterStore, prefix: str, d: int) -> None:
    for proj in ("q", "k", "v", "o"):
        store.linear(f"{prefix}.{proj}", d, d)


def _ffn_params(store: ParameterStore, prefix: str, d: int, mult: int) -> None:
    store.linear(f"{prefix}.in", d, mult * d)
    store.linear(f"{prefix}.out", mult * d, d)


def init_encoder_params(store: ParameterStore, config: ModelConfig) -> None:
    d = config.d
    store.table("embed.word", config.vocab_size, d)
    store.table("embed.pos", config.max_tokens, d)
    store.norm("embed.word_ln", d)
    store.linear("embed.feat", config.feature_dim, d)
    store.norm("embed.feat_ln", d)
    store.linear("embed.box", BOX_FEATURES, d)
    store.norm("embed.box_ln", d)

    for stack, count in (("lang", config.lang_layers), ("vision", config.vision_layers)):
        for i in range(count):
            prefix = f"{stack}.{i}"
            _attention_params(store, f"{prefix}.attn", d)
            store.norm(f"{prefix}.ln_attn", d)
            _ffn_params(store, f"{prefix}.ffn", d, config.ffn_mult)
            store.norm(f"{prefix}.ln_ffn", d)

    for i in range(config.cross_layers):
        prefix = f"cross.{i}"
        for side in ("s", "o"):
            _attention_params(store, f"{prefix}.cross_{side}", d)
            store.norm(f"{prefix}.ln_cross_{side}", d)
            _attention_params(store, f"{prefix}.self_{side}", d)
            store.norm(f"{prefix}.ln_self_{side}", d)
            _ffn_params(store, f"{prefix}.ffn_{side}", d, config.ffn_mult)
            store.norm(f"{prefix}.ln_ffn_{side}", d)


# ----------------------------------------------------------------------
# embeddings
# ----------------------------------------------------------------------
def box_features(boxes: np.ndarray) -> np.ndarray:
    """Expand boxes to (x_min, y_min, x_max, y_max, width, height, area)."""
    boxes = np.asarray(boxes, dtype=np.float64)
    width = boxes[..., 2] - boxes[..., 0]
    height = boxes[..., 3] - boxes[..., 1]
    return np.concatenate([boxes, width[..., None], height[..., None], (width * height)[..., None]], axis=-1)


def apply_norm(x: Tensor, params: ParameterStore, name: str, eps: float) -> Tensor:
    return layer_norm(x, params[f"{name}.gain"], params[f"{name}.bias"], eps)


def apply_linear(x: Tensor, params: ParameterStore, name: str) -> Tensor:
    bias = params[f"{name}.b"] if f"{name}.b" in params else None
    return linear(x, params[f"{name}.w"], bias)


def embed_objects(features: np.ndarray, boxes: np.ndarray, params: ParameterStore, eps: float = 1e-5) -> Tensor:
    """Average of the layer-normed feature projection and box projection."""
    validate_boxes(boxes)
    feats = Tensor(features)
    geometry = Tensor(box_features(boxes))
    feat_branch = apply_norm(apply_linear(feats, params, "embed.feat"), params, "embed.feat_ln", eps)
    box_branch = apply_norm(apply_linear(geometry, params, "embed.box"), params, "embed.box_ln", eps)
    return (feat_branch + box_branch) * 0.5


def embed_words(token_ids: np.ndarray, params: ParameterStore, eps: float = 1e-5) -> Tensor:
    """Word lookup plus learned position embedding, layer-normed."""
    token_ids = np.asarray(token_ids, dtype=np.int64)
    table = params["embed.word"]
    positions = params["embed.pos"]
    if token_ids.size and (token_ids.min() < 0 or token_ids.max() >= table.shape[0]):
        raise InvalidInputError(f"token id out of range for vocabulary of {table.shape[0]}")
    length = token_ids.shape[-1]
    if length > positions.shape[0]:
        raise ShapeError(f"sequence of {length} tokens exceeds max_tokens={positions.shape[0]}")
    summed = table[token_ids] + positions[np.arange(length)]
    return apply_norm(summed, params, "embed.word_ln", eps)


# ----------------------------------------------------------------------
# attention and blocks
# ----------------------------------------------------------------------
def multi_head_attention(
    q_seq: Tensor,
    kv_seq: Tensor,
    key_mask: np.ndarray,
    params: ParameterStore,
    prefix: str,
    heads: int,
) -> Tuple[Tensor, np.ndarray]:
    """Scaled dot-product attention with ``heads`` heads.

    ``key_mask`` has shape (B, N_k) and marks valid keys. Returns the
    output-projected sequence and the per-head weights (B, H, N_q, N_k).
    """
    batch, n_q, d = q_seq.shape
    n_k = kv_seq.shape[1]
    if d % heads != 0:
        raise ShapeError(f"width {d} does not split into {heads} heads")
    head_dim = d // heads

    def split(x: Tensor, n: int) -> Tensor:
        return x.reshape(batch, n, heads, head_dim).transpose(0, 2, 1, 3)

    q = split(apply_linear(q_seq, params, f"{prefix}.q"), n_q)
    k = split(apply_linear(kv_seq, params, f"{prefix}.k"), n_k)
    v = split(apply_linear(kv_seq, params, f"{prefix}.v"), n_k)

    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(head_dim))
    mask = np.asarray(key_mask, dtype=bool)[:, None, None, :]
    alpha = softmax(scores, axis=-1, mask=mask)
    context = (alpha @ v).transpose(0, 2, 1, 3).reshape(batch, n_q, d)
    return apply_linear(context, params, f"{prefix}.o"), alpha.data


def feed_forward(x: Tensor, params: ParameterStore, prefix: str) -> Tensor:
    return apply_linear(apply_linear(x, params, f"{prefix}.in").relu(), params, f"{prefix}.out")


def _residual(x: Tensor, update: Tensor, params: ParameterStore, norm: str, config: ModelConfig, rng) -> Tensor:
    return apply_norm(x + dropout(update, config.dropout, rng), params, norm, config.layer_norm_eps)


def intra_modality_block(
    x: Tensor,
    mask: np.ndarray,
    params: ParameterStore,
    prefix: str,
    config: ModelConfig,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, np.ndarray]:
    """Self-attention sublayer then feed-forward sublayer, each post-norm residual."""
    attended, alpha = multi_head_attention(x, x, mask, params, f"{prefix}.attn", config.heads)
    x = _residual(x, attended, params, f"{prefix}.ln_attn", config, rng)
    x = _residual(x, feed_forward(x, params, f"{prefix}.ffn"), params, f"{prefix}.ln_ffn", config, rng)
    return x, alpha


def inter_modality_block(
    s: Tensor,
    o: Tensor,
    s_mask: np.ndarray,
    o_mask: np.ndarray,
    params: ParameterStore,
    prefix: str,
    config: ModelConfig,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Tensor, Dict[str, np.ndarray]]:
    """Cross-attention in both directions from the same inputs, then per-modality
    self-attention and feed-forward sublayers."""
    heads = config.heads
    s_cross, alpha_s_from_o = multi_head_attention(s, o, o_mask, params, f"{prefix}.cross_s", heads)
    o_cross, alpha_o_from_s = multi_head_attention(o, s, s_mask, params, f"{prefix}.cross_o", heads)
    s_mid = _residual(s, s_cross, params, f"{prefix}.ln_cross_s", config, rng)
    o_mid = _residual(o, o_cross, params, f"{prefix}.ln_cross_o", config, rng)

    s_self, alpha_s_self = multi_head_attention(s_mid, s_mid, s_mask, params, f"{prefix}.self_s", heads)
    o_self, alpha_o_self = multi_head_attention(o_mid, o_mid, o_mask, params, f"{prefix}.self_o", heads)
    s_mid = _residual(s_mid, s_self, params, f"{prefix}.ln_self_s", config, rng)
    o_mid = _residual(o_mid, o_self, params, f"{prefix}.ln_self_o", config, rng)

    s_out = _residual(s_mid, feed_forward(s_mid, params, f"{prefix}.ffn_s"), params, f"{prefix}.ln_ffn_s", config, rng)
    o_out = _residual(o_mid, feed_forward(o_mid, params, f"{prefix}.ffn_o"), params, f"{prefix}.ln_ffn_o", config, rng)

    traces = {
        CROSS_LANG_FROM_VISION: alpha_s_from_o,
        CROSS_VISION_FROM_LANG: alpha_o_from_s,
        CROSS_LANG_SELF: alpha_s_self,
        CROSS_VISION_SELF: alpha_o_self,
    }
    return s_out, o_out, traces


def encode(
    inputs: EncoderInputs,
    params: ParameterStore,
    config: ModelConfig,
    rng: Optional[np.random.Generator] = None,
) -> EncoderOutput:
    """Run the language and vision stacks, then the cross-modality stack."""
    if inputs.features.shape[-1] != config.feature_dim:
        raise ShapeError(f"features have width {inputs.features.shape[-1]}, model expects {config.feature_dim}")
    eps = config.layer_norm_eps
    s = embed_words(inputs.token_ids, params, eps)
    o = embed_objects(inputs.features, inputs.boxes, params, eps)
    traces: Dict[str, List[np.ndarray]] = {key: [] for key in TRACE_KEYS}

    for i in range(config.lang_layers):
        s, alpha = intra_modality_block(s, inputs.token_mask, params, f"lang.{i}", config, rng)
        traces[LANG_SELF].append(alpha)
    for i in range(config.vision_layers):
        o, alpha = intra_modality_block(o, inputs.object_mask, params, f"vision.{i}", config, rng)
        traces[VISION_SELF].append(alpha)
    for i in range(config.cross_layers):
        s, o, block_traces = inter_modality_block(
            s, o, inputs.token_mask, inputs.object_mask, params, f"cross.{i}", config, rng
        )
        for key, alpha in block_traces.items():
            traces[key].append(alpha)

    return EncoderOutput(objects=o, words=s, traces=traces)
