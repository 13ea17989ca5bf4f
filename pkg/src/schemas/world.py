"""Synthetic scene, detection and utterance schemas (the dataset file contents)."""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.schemas.config import WorldConfig

Box = Tuple[float, float, float, float]

CLS_TOKEN = "[CLS]"
MASK_TOKEN = "[MASK]"
PAD_TOKEN = "[PAD]"
CLS_ID, MASK_ID, PAD_ID = 0, 1, 2
SPECIAL_TOKENS = (CLS_TOKEN, MASK_TOKEN, PAD_TOKEN)

BACKGROUND_CLASS = "background"
NO_ATTRIBUTE = "none"


def _check_box(box: Box) -> Box:
    x_min, y_min, x_max, y_max = box
    if not (x_min < x_max and y_min < y_max):
        raise ValueError(f"degenerate box {box}")
    if min(box) < 0.0 or max(box) > 1.0:
        raise ValueError(f"box {box} leaves the unit square")
    return box


class SceneObject(BaseModel):
    """Ground-truth object: labels, box and latent visual feature."""

    model_config = ConfigDict(extra="forbid")

    class_id: int = Field(..., ge=0)
    attribute_id: int = Field(..., ge=0)
    box: Box
    feature: List[float]

    @field_validator("box")
    @classmethod
    def check_box(cls, v: Box) -> Box:
        return _check_box(v)


class Scene(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scene_id: int = Field(..., ge=0)
    seed: int
    objects: List[SceneObject] = Field(..., min_length=1)


class Detection(BaseModel):
    """Simulated detector output for one slot. ``source`` is the ground-truth
    object index, ``None`` for background padding."""

    model_config = ConfigDict(extra="forbid")

    class_id: int = Field(..., ge=0)
    attribute_id: int = Field(..., ge=0)
    box: Box
    feature: List[float]
    background: bool = False
    source: Optional[int] = None

    @field_validator("box")
    @classmethod
    def check_box(cls, v: Box) -> Box:
        return _check_box(v)


class GroundedSpan(BaseModel):
    """Token range ``[start, end)`` pointing at a ground-truth box."""

    model_config = ConfigDict(extra="forbid")

    start: int = Field(..., ge=1, description="Position 0 is [CLS]")
    end: int
    box: Box
    object_index: Optional[int] = None

    @field_validator("box")
    @classmethod
    def check_box(cls, v: Box) -> Box:
        return _check_box(v)

    @model_validator(mode="after")
    def check_range(self) -> "GroundedSpan":
        if self.end <= self.start:
            raise ValueError(f"empty span [{self.start}, {self.end})")
        return self


class SceneView(BaseModel):
    """A scene together with what the detector saw in it."""

    model_config = ConfigDict(extra="forbid")

    scene: Scene
    detections: List[Detection]


class UtteranceRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    record_id: int = Field(..., ge=0)
    split: Literal["train", "eval"]
    kind: Literal["caption", "question", "pair"]
    text: str
    tokens: List[int] = Field(..., min_length=1, description="Unpadded ids, [CLS] first")
    spans: List[GroundedSpan] = Field(default_factory=list)
    answer: Optional[int] = None
    label: Optional[bool] = None
    views: List[SceneView] = Field(..., min_length=1, max_length=2)

    @model_validator(mode="after")
    def check_record(self) -> "UtteranceRecord":
        if self.tokens[0] != CLS_ID:
            raise ValueError("first token must be [CLS]")
        for span in self.spans:
            if span.end > len(self.tokens):
                raise ValueError(f"span [{span.start}, {span.end}) runs past {len(self.tokens)} tokens")
        if self.kind == "question" and self.answer is None:
            raise ValueError("question records need an answer")
        if self.kind == "pair" and (self.label is None or len(self.views) != 2):
            raise ValueError("pair records need a label and two scene views")
        return self

    @property
    def scene_ids(self) -> List[int]:
        return [view.scene.scene_id for view in self.views]


class DatasetHeader(BaseModel):
    """First line of a dataset file; everything needed to decode the records."""

    model_config = ConfigDict(extra="forbid")

    format_version: int
    world_config: WorldConfig
    vocab: List[str]
    class_names: List[str]
    attribute_names: List[str]
    answers: List[str]
    synonym_clusters: Dict[str, List[str]]
    embedding_seed: int
    embedding_dim: int
    counts: Dict[str, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_specials(self) -> "DatasetHeader":
        if tuple(self.vocab[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocab must start with [CLS], [MASK], [PAD]")
        return self
