"""Common validation utilities for numeric inputs."""

from typing import Sequence

import numpy as np

from src.core.exceptions import InvalidInputError


def validate_box(box: Sequence[float]) -> None:
    """Check one ``(x_min, y_min, x_max, y_max)`` box normalized to [0, 1]."""
    if len(box) != 4:
        raise InvalidInputError(f"box must have 4 coordinates, got {len(box)}")
    x_min, y_min, x_max, y_max = box
    if not (x_min < x_max and y_min < y_max):
        raise InvalidInputError(f"degenerate box {tuple(box)}")
    if min(box) < 0.0 or max(box) > 1.0:
        raise InvalidInputError(f"box {tuple(box)} leaves the unit square")


def validate_boxes(boxes: np.ndarray) -> None:
    """Vectorized :func:`validate_box` over an array of shape ``(..., 4)``."""
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.shape[-1] != 4:
        raise InvalidInputError(f"boxes must end in 4 coordinates, got shape {boxes.shape}")
    x_min, y_min, x_max, y_max = np.moveaxis(boxes, -1, 0)
    if np.any(x_min >= x_max) or np.any(y_min >= y_max):
        raise InvalidInputError("degenerate box in input")
    if boxes.size and (boxes.min() < 0.0 or boxes.max() > 1.0):
        raise InvalidInputError("box leaves the unit square")


def validate_distribution(values: np.ndarray, what: str, atol: float = 1e-6) -> None:
    """Rows along the last axis must be nonnegative and sum to 1."""
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0.0):
        raise InvalidInputError(f"{what} has negative entries")
    sums = values.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > atol):
        raise InvalidInputError(f"{what} rows must sum to 1 (got {np.round(sums, 6).tolist()})")

