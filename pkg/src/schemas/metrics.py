"""Training log lines, evaluation reports and ablation summaries."""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class LossRecord(BaseModel):
    """One optimizer step. Only active loss terms appear in ``losses``."""

    model_config = ConfigDict(extra="forbid")

    step: int
    epoch: int
    losses: Dict[str, float]
    total: float
    lr: float

    def as_line(self) -> Dict:
        """Flat ``{step, epoch, <loss>..., total, lr}`` form of the metrics log."""
        return {"step": self.step, "epoch": self.epoch, **self.losses, "total": self.total, "lr": self.lr}


class MetricsReport(BaseModel):
    """Evaluation of one checkpoint on one split (uncorrupted pairs only)."""

    model_config = ConfigDict(extra="forbid")

    split: str
    epoch: int
    examples: int
    qa_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0)
    match_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0)
    pair_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0)
    alignment_recall: Optional[float] = Field(None, ge=0.0, le=1.0, description="recall@1 over valid annotated words")
    attention_target_mass: Optional[float] = Field(None, ge=0.0, le=1.0)
    alignment_kl: Optional[float] = Field(None, ge=0.0)
    losses: Dict[str, float] = Field(default_factory=dict)
    counts: Dict[str, int] = Field(default_factory=dict)


class AblationRun(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int
    use_alignment: bool
    qa_accuracy: float
    pair_accuracy: float
    alignment_recall: float
    attention_target_mass: float


class AblationRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variant: str
    qa_accuracy_mean: float
    qa_accuracy_std: float
    pair_accuracy_mean: float
    pair_accuracy_std: float
    alignment_recall_mean: float
    alignment_recall_std: float
    attention_target_mass_mean: float


class AblationReport(BaseModel):
    """Paired with/without-alignment comparison over several seeds."""

    model_config = ConfigDict(extra="forbid")

    seeds: List[int]
    rows: List[AblationRow]
    delta_qa_accuracy: float
    delta_pair_accuracy: float
    delta_alignment_recall: float
    attention_mass_ratio: Optional[float] = None
    runs: List[AblationRun]
