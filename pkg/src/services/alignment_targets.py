"""Weak soft-alignment targets from pointer boxes and detections.

Each annotated word gets a distribution over detector slots that averages a
position criterion (IoU of the pointer box with each detection box) and a
semantic criterion (word similarity to the detection's class and attribute
names). Both criteria are sum-normalized over the detections first.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.core.exceptions import ShapeError
from src.schemas.world import Detection, GroundedSpan
from src.services.embedding_table import EmbeddingTable
from src.utils.validators import validate_box, validate_boxes

CLASS_WEIGHT = 0.75
ATTRIBUTE_WEIGHT = 0.25


@dataclass
class AlignmentTarget:
    """Row-stochastic word x object matrix; invalid rows are all zero."""

    matrix: np.ndarray  # (T, O)
    valid: np.ndarray  # (T,) bool

    @classmethod
    def empty(cls, num_tokens: int, num_objects: int) -> "AlignmentTarget":
        return cls(np.zeros((num_tokens, num_objects)), np.zeros(num_tokens, dtype=bool))


def iou(box_a: Sequence[float], box_b: Sequence[float]) -> float:
    """Intersection over union of two ``(x_min, y_min, x_max, y_max)`` boxes."""
    validate_box(box_a)
    validate_box(box_b)
    ix = max(0.0, min(box_a[2], box_b[2]) - max(box_a[0], box_b[0]))
    iy = max(0.0, min(box_a[3], box_b[3]) - max(box_a[1], box_b[1]))
    inter = ix * iy
    area_a = (box_a[2] - box_a[0]) * (box_a[3] - box_a[1])
    area_b = (box_b[2] - box_b[0]) * (box_b[3] - box_b[1])
    return inter / (area_a + area_b - inter)


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU, shape (len(boxes_a), len(boxes_b))."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    validate_boxes(a)
    validate_boxes(b)
    ix = np.clip(np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0]), 0.0, None)
    iy = np.clip(np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1]), 0.0, None)
    inter = ix * iy
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def semantic_score(word: str, class_name: str, attribute_name: str, table: EmbeddingTable) -> float:
    """0.75 cos(word, class) + 0.25 cos(word, attribute), cosines clamped at 0."""
    class_sim = max(0.0, table.cosine(word, class_name))
    attribute_sim = max(0.0, table.cosine(word, attribute_name))
    return CLASS_WEIGHT * class_sim + ATTRIBUTE_WEIGHT * attribute_sim


def _normalized(row: np.ndarray) -> Optional[np.ndarray]:
    total = row.sum()
    if total <= 0.0:
        return None
    return row / total


def combine_criteria(position: np.ndarray, semantic: np.ndarray) -> Optional[np.ndarray]:
    """Average of the two sum-normalized criteria.

    A criterion that is zero everywhere drops out and the other one is used
    alone; ``None`` when both are zero.
    """
    parts = [p for p in (_normalized(position), _normalized(semantic)) if p is not None]
    if not parts:
        return None
    return sum(parts) / len(parts)


def build_soft_targets(
    spans: Sequence[GroundedSpan],
    words: Sequence[str],
    detections: Sequence[Detection],
    table: EmbeddingTable,
    class_names: Sequence[str],
    attribute_names: Sequence[str],
    num_tokens: int,
) -> AlignmentTarget:
    """Build the soft alignment target for one sentence against one scene's detections.

    ``words`` are the token strings by position ([CLS] at 0). Background
    detections get zero under both criteria. A span's semantic criterion is
    the mean over its words; every token of the span receives the span's row.
    """
    if len(words) > num_tokens:
        raise ShapeError(f"{len(words)} tokens do not fit in {num_tokens} rows")
    target = AlignmentTarget.empty(num_tokens, len(detections))
    if not detections:
        return target

    foreground = np.array([not det.background for det in detections])
    det_boxes = np.array([det.box for det in detections], dtype=np.float64)

    for span in spans:
        if span.end > len(words):
            raise ShapeError(f"span [{span.start}, {span.end}) runs past {len(words)} tokens")
        position = iou_matrix(np.array([span.box]), det_boxes)[0] * foreground

        semantic = np.zeros(len(detections))
        span_words = words[span.start:span.end]
        for j, det in enumerate(detections):
            if not foreground[j]:
                continue
            class_name = class_names[det.class_id]
            attribute_name = attribute_names[det.attribute_id]
            semantic[j] = np.mean([semantic_score(w, class_name, attribute_name, table) for w in span_words])

        row = combine_criteria(position, semantic)
        if row is None:
            continue
        target.matrix[span.start:span.end] = row
        target.valid[span.start:span.end] = True

    return target
