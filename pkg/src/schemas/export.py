"""Attention export sidecar."""

from typing import List, Optional

from pydantic import BaseModel

from src.schemas.world import Box


class ObjectDescriptor(BaseModel):
    slot: int
    class_name: str
    attribute: str
    box: Box
    background: bool
    source: Optional[int] = None


class AttentionSidecar(BaseModel):
    """Describes the rows (tokens) and columns (detections) of the exported CSV matrices."""

    record_id: int
    kind: str
    text: str
    tokens: List[str]
    objects: List[ObjectDescriptor]
    layer: int
    heads: int
    sum_heads: bool
    files: List[str]
    predicted_answer: str
    answer: Optional[str] = None
