"""Activation, normalization and loss primitives built on :mod:`src.numeric.tensor`.

Fused ops (softmax, log-softmax, layer norm, logistic loss) carry their own
adjoints; the rest are compositions of tensor ops.
"""

from typing import Optional, Tuple, Union

import numpy as np

from src.core.exceptions import InvalidInputError, ShapeError
from src.numeric.tensor import Tensor, unbroadcast, where
from src.utils.validators import validate_distribution

KL_FLOOR = 1e-8
LAYER_NORM_EPS = 1e-5


def sigmoid_np(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(x: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """Max-subtracted softmax. Entries where ``mask`` is false get probability 0."""
    data = x.data
    if data.ndim == 0 or data.shape[axis] == 0:
        raise ShapeError("softmax over an empty axis")
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), data.shape)
        if not np.all(mask.any(axis=axis)):
            raise InvalidInputError("softmax row with every entry masked")
        data = np.where(mask, data, -np.inf)
    shifted = data - data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return ((g - (g * out).sum(axis=axis, keepdims=True)) * out,)

    return Tensor.from_op(out, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    data = x.data
    if data.ndim == 0 or data.shape[axis] == 0:
        raise ShapeError("log_softmax over an empty axis")
    shifted = data - data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return Tensor.from_op(out, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis to zero mean / unit population variance."""
    data = x.data
    if data.ndim == 0 or data.shape[-1] == 0:
        raise ShapeError("layer_norm over an empty vector")
    mu = data.mean(axis=-1, keepdims=True)
    centered = data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    gamma, beta = gain.data, bias.data
    out = xhat * gamma + beta

    def backward(g):
        g_gain = unbroadcast(g * xhat, gamma.shape)
        g_bias = unbroadcast(g, beta.shape)
        gx_hat = g * gamma
        gx = inv * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, g_gain, g_bias

    return Tensor.from_op(out, (x, gain, bias), backward, "layer_norm")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ W + b`` with ``W`` of shape (in, out)."""
    out = x @ weight
    if bias is not None:
        out = out + bias
    return out


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when ``p == 0`` or no generator is given."""
    if p <= 0.0 or rng is None:
        return x
    keep = rng.random(x.shape) >= p
    return where(keep, x, 0.0) * (1.0 / (1.0 - p))


def topk_softmax(scores: Tensor, k: int) -> Tuple[Tensor, np.ndarray]:
    """Softmax over the ``k`` largest entries of each row, zeros elsewhere.

    Ties at the k-th score keep the lowest index. ``k`` is clamped to the row
    length. Returns the probabilities and the boolean support mask.
    """
    if k < 1:
        raise InvalidInputError(f"top-k needs k >= 1, got {k}")
    width = scores.shape[-1]
    k = min(k, width)
    # stable sort of the negated scores puts the lowest index first among ties
    order = np.argsort(-scores.data, axis=-1, kind="stable")
    support = np.zeros(scores.shape, dtype=bool)
    np.put_along_axis(support, order[..., :k], True, axis=-1)
    return softmax(scores, axis=-1, mask=support), support


def kl_divergence(target: np.ndarray, pred: Tensor, floor: float = KL_FLOOR) -> Tensor:
    """KL(target || pred) along the last axis, one value per row.

    ``pred`` is floored at ``floor`` and renormalized first so sparse
    predictions keep the loss finite.
    """
    p = np.asarray(target, dtype=np.float64)
    if p.shape != pred.shape:
        raise ShapeError(f"KL shapes differ: target {p.shape} vs prediction {pred.shape}")
    if np.any(pred.data < 0.0):
        raise InvalidInputError("prediction has negative entries")
    validate_distribution(p, "KL target")
    validate_distribution(pred.data, "KL prediction")

    floored = pred.clip_min(floor)
    normalized = floored / floored.sum(axis=-1, keepdims=True)
    positive = p > 0.0
    neg_entropy = np.where(positive, p * np.log(np.where(positive, p, 1.0)), 0.0).sum(axis=-1)
    cross = (normalized.log() * p).sum(axis=-1)
    return (Tensor(neg_entropy) - cross).clip_min(0.0)


def _flat_labels(labels: Union[int, np.ndarray], batch_shape: Tuple[int, ...], classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != batch_shape:
        raise ShapeError(f"labels shape {labels.shape} does not match logits batch shape {batch_shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise InvalidInputError(f"label out of range for {classes} classes")
    return labels.reshape(-1)


def cross_entropy(logits: Tensor, labels: Union[int, np.ndarray]) -> Tensor:
    """Mean of ``-log softmax(logits)[label]`` over the leading axes."""
    classes = logits.shape[-1]
    flat = _flat_labels(labels, logits.shape[:-1], classes)
    if flat.size == 0:
        raise ShapeError("cross_entropy over an empty batch")
    log_probs = log_softmax(logits).reshape(-1, classes)
    picked = log_probs[np.arange(flat.size), flat]
    return -picked.mean()


def binary_cross_entropy_with_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean logistic loss, evaluated in the overflow-free softplus form."""
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != logits.shape:
        raise ShapeError(f"labels shape {y.shape} does not match logits shape {logits.shape}")
    if logits.size == 0:
        raise ShapeError("binary cross entropy over an empty batch")
    if np.any((y < 0.0) | (y > 1.0)):
        raise InvalidInputError("binary labels must lie in [0, 1]")
    z = logits.data
    n = z.size
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))

    def backward(g):
        return (g * (sigmoid_np(z) - y) / n,)

    return Tensor.from_op(np.asarray(loss.mean()), (logits,), backward, "bce_logits")


def mse(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared error over every element."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape != pred.shape:
        raise ShapeError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    return (diff * diff).mean()
