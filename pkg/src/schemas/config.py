"""Configuration schemas: model shape, synthetic world, training run."""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ModelConfig(BaseModel):
    """Encoder and head hyperparameters.

    ``lang_layers``/``vision_layers`` size the single-modality stacks and
    ``cross_layers`` the stack where words and objects attend to each other.
    Shape comments elsewhere write T for ``max_tokens`` and O for ``num_objects``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    d: int = Field(32, ge=1, description="Embedding width")
    heads: int = Field(4, ge=1)
    lang_layers: int = Field(2, ge=1)
    vision_layers: int = Field(2, ge=1)
    cross_layers: int = Field(2, ge=1)
    max_tokens: int = Field(12, ge=2)
    num_objects: int = Field(6, ge=1)
    vocab_size: int = Field(64, ge=3)
    class_count: int = Field(7, ge=1)
    attribute_count: int = Field(7, ge=1)
    answer_count: int = Field(19, ge=1)
    feature_dim: int = Field(32, ge=1)
    ffn_mult: int = Field(4, ge=1)
    dropout: float = Field(0.0, ge=0.0, lt=1.0)
    init_std: float = Field(0.02, gt=0.0)
    layer_norm_eps: float = Field(1e-5, gt=0.0)

    @model_validator(mode="after")
    def check_head_split(self) -> "ModelConfig":
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} is not divisible by heads={self.heads}")
        return self

    @property
    def head_dim(self) -> int:
        return self.d // self.heads

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides) -> "ModelConfig":
        values = dict(
            d=768, heads=12, lang_layers=9, vision_layers=5, cross_layers=5,
            max_tokens=20, num_objects=36,
        )
        values.update(overrides)
        return cls(**values)


class VocabEntry(BaseModel):
    """A class or attribute name plus the synonyms sentences may use for it."""

    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    synonyms: List[str] = Field(default_factory=list)


class NoiseConfig(BaseModel):
    """Simulated detector imperfections."""

    model_config = ConfigDict(extra="forbid")

    box_jitter: float = Field(0.05, ge=0.0, description="Gaussian sigma per box coordinate")
    jitter_bound: float = Field(2.0, gt=0.0, description="Truncation in units of sigma")
    class_confusion: float = Field(0.1, ge=0.0, le=1.0)
    attribute_confusion: float = Field(0.1, ge=0.0, le=1.0)
    drop: float = Field(0.1, ge=0.0, le=1.0)
    feature_noise: float = Field(0.1, ge=0.0)


DEFAULT_CLASSES = [
    VocabEntry(name="square", synonyms=["box"]),
    VocabEntry(name="circle", synonyms=["disc"]),
    VocabEntry(name="triangle", synonyms=["wedge"]),
    VocabEntry(name="star", synonyms=["asterisk"]),
    VocabEntry(name="cross", synonyms=["plus"]),
    VocabEntry(name="diamond", synonyms=["rhombus"]),
]

DEFAULT_ATTRIBUTES = [
    VocabEntry(name="red", synonyms=["crimson"]),
    VocabEntry(name="blue", synonyms=["navy"]),
    VocabEntry(name="green", synonyms=["emerald"]),
    VocabEntry(name="yellow", synonyms=["golden"]),
    VocabEntry(name="purple", synonyms=["violet"]),
    VocabEntry(name="gray", synonyms=["grey"]),
]


class WorldConfig(BaseModel):
    """Synthetic scene, detector and dataset generation settings."""

    model_config = ConfigDict(extra="forbid")

    classes: List[VocabEntry] = Field(default_factory=lambda: list(DEFAULT_CLASSES))
    attributes: List[VocabEntry] = Field(default_factory=lambda: list(DEFAULT_ATTRIBUTES))
    class_confusion_groups: List[List[str]] = Field(
        default_factory=lambda: [["square", "diamond"], ["circle", "star"], ["triangle", "cross"]]
    )
    attribute_confusion_groups: List[List[str]] = Field(
        default_factory=lambda: [["red", "purple"], ["blue", "green"], ["yellow", "gray"]]
    )
    min_objects: int = Field(2, ge=1)
    max_objects: int = Field(5, ge=1)
    num_objects: int = Field(6, ge=1, description="Detector output slots (O)")
    feature_dim: int = Field(32, ge=1)
    box_size: Tuple[float, float] = (0.15, 0.35)
    max_iou: float = Field(0.3, ge=0.0, le=1.0)
    max_placement_attempts: int = Field(1000, ge=1)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    num_scenes: int = Field(800, ge=2)
    train_utterances: int = Field(2000, ge=0)
    eval_utterances: int = Field(400, ge=0)
    eval_scene_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    annotation_rate: float = Field(0.7, ge=0.0, le=1.0)
    synonym_rate: float = Field(0.3, ge=0.0, le=1.0)
    num_shards: int = Field(4, ge=1)
    embedding_dim: int = Field(64, ge=2)
    max_tokens: int = Field(12, ge=4)
    seed: int = Field(0, ge=0)

    @field_validator("box_size")
    def check_box_size(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        low, high = v
        if not 0.0 < low <= high < 1.0:
            raise ValueError("box_size must satisfy 0 < low <= high < 1")
        return v

    @model_validator(mode="after")
    def check_object_counts(self) -> "WorldConfig":
        if self.min_objects > self.max_objects:
            raise ValueError("min_objects must not exceed max_objects")
        if self.max_objects > self.num_objects:
            raise ValueError("max_objects must fit in num_objects detector slots")
        class_names = {c.name for c in self.classes}
        for group in self.class_confusion_groups:
            for name in group:
                if name not in class_names:
                    raise ValueError(f"confusion group names unknown class {name!r}")
        attr_names = {a.name for a in self.attributes}
        for group in self.attribute_confusion_groups:
            for name in group:
                if name not in attr_names:
                    raise ValueError(f"confusion group names unknown attribute {name!r}")
        return self


LOSS_NAMES = ("lang_mask", "vis_class", "vis_attr", "vis_feat", "match", "vqa", "align", "pair")


class LossWeights(BaseModel):
    """Per-term weights of the total loss."""

    model_config = ConfigDict(extra="forbid")

    lang_mask: float = Field(1.0, ge=0.0)
    vis_class: float = Field(1.0, ge=0.0)
    vis_attr: float = Field(1.0, ge=0.0)
    vis_feat: float = Field(1.0, ge=0.0)
    match: float = Field(1.0, ge=0.0)
    vqa: float = Field(1.0, ge=0.0)
    align: float = Field(1.0, ge=0.0)
    pair: float = Field(1.0, ge=0.0)

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in LOSS_NAMES}


class RunConfig(BaseModel):
    """Everything a training / evaluation run needs, loaded from one JSON file."""

    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    preset: Literal["toy", "full"] = "toy"
    model_overrides: Dict[str, float] = Field(default_factory=dict)
    loss_weights: LossWeights = Field(default_factory=LossWeights)
    p_mask: float = Field(0.15, ge=0.0, le=1.0)
    p_corrupt: float = Field(0.5, ge=0.0, le=1.0)
    top_k: int = Field(3, ge=1)
    epochs: int = Field(20, ge=1)
    vqa_start_epoch: Optional[int] = Field(None, ge=0)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-3, gt=0.0)
    warmup_steps: int = Field(50, ge=0)
    decay_to_zero: bool = True
    grad_clip: Optional[float] = Field(None, gt=0.0)
    weight_decay: float = Field(0.0, ge=0.0)
    seed: int = Field(0, ge=0)
    use_alignment: bool = True
    attention_layer: Optional[int] = Field(None, ge=0)
    dataset_path: str = "runs/dataset.jsonl"
    output_dir: str = "runs/train"
    world: WorldConfig = Field(default_factory=WorldConfig)

    @model_validator(mode="after")
    def resolve_schedule(self) -> "RunConfig":
        if self.vqa_start_epoch is None:
            self.vqa_start_epoch = self.epochs // 2
        if self.vqa_start_epoch > self.epochs:
            raise ValueError(
                f"vqa_start_epoch={self.vqa_start_epoch} exceeds epochs={self.epochs}"
            )
        unknown = set(self.model_overrides) - set(ModelConfig.model_fields)
        if unknown:
            raise ValueError(f"model_overrides has unknown fields: {sorted(unknown)}")
        return self

    def base_model_config(self, **resolved) -> ModelConfig:
        """Preset + overrides + values resolved from the dataset header."""
        values = {k: _coerce_override(k, v) for k, v in self.model_overrides.items()}
        values.update(resolved)
        if self.preset == "full":
            return ModelConfig.full(**values)
        return ModelConfig.toy(**values)


def _coerce_override(name: str, value: float):
    annotation = ModelConfig.model_fields[name].annotation
    if annotation is int:
        return int(value)
    return value
