"""Checkpoint file schema."""

from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.schemas.config import ModelConfig, RunConfig


class ArrayBlob(BaseModel):
    """An array as its shape plus row-major flat values."""

    model_config = ConfigDict(extra="forbid")

    shape: List[int]
    data: List[float]

    @model_validator(mode="after")
    def check_size(self) -> "ArrayBlob":
        if int(np.prod(self.shape, dtype=np.int64)) != len(self.data):
            raise ValueError(f"shape {self.shape} does not hold {len(self.data)} values")
        return self

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ArrayBlob":
        array = np.asarray(array, dtype=np.float64)
        return cls(shape=list(array.shape), data=array.reshape(-1).tolist())

    def to_array(self) -> np.ndarray:
        return np.asarray(self.data, dtype=np.float64).reshape(self.shape)


class ScheduleState(BaseModel):
    model_config = ConfigDict(extra="forbid")

    base_lr: float
    warmup_steps: int
    total_steps: Optional[int] = None


class OptimizerState(BaseModel):
    model_config = ConfigDict(extra="forbid")

    step: int = Field(..., ge=0)
    beta1: float
    beta2: float
    epsilon: float
    weight_decay: float = 0.0
    schedule: ScheduleState
    first_moment: Dict[str, ArrayBlob] = Field(default_factory=dict)
    second_moment: Dict[str, ArrayBlob] = Field(default_factory=dict)


class CheckpointFile(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    format_version: int
    epoch: int = Field(..., ge=0, description="Completed epochs")
    model: ModelConfig
    run_config: RunConfig
    parameters: Dict[str, ArrayBlob]
    optimizer: Optional[OptimizerState] = None
