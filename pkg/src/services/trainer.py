"""Multi-objective training loop."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from src.core.exceptions import ConfigError, NonFiniteError, TrainingDivergedError
from src.models.model import AlignmentModel
from src.numeric.optim import Adam, LinearSchedule
from src.repositories.checkpoint import CheckpointRepository
from src.repositories.metrics import MetricsRepository
from src.schemas.config import RunConfig
from src.schemas.metrics import LossRecord, MetricsReport
from src.schemas.world import DatasetHeader, UtteranceRecord
from src.services.batching import BatchBuilder, PreparedRecord, scene_pool
from src.services.dataset_builder import embedding_table_for
from src.services.evaluator import Evaluator
from src.services.pipeline import compute_losses, resolve_model_config
from src.utils.rng import derive_seed, make_rng

logger = logging.getLogger(__name__)

INIT_STREAM = 11
SHUFFLE_STREAM = 12
BATCH_STREAM = 13
DROPOUT_STREAM = 14

METRICS_FILE = "metrics.jsonl"
EVAL_METRICS_FILE = "eval_metrics.jsonl"
CHECKPOINT_FILE = "checkpoint.json"


@dataclass
class TrainingResult:
    model: AlignmentModel
    steps: int
    output_dir: Path
    reports: List[MetricsReport] = field(default_factory=list)

    @property
    def final_report(self) -> Optional[MetricsReport]:
        return self.reports[-1] if self.reports else None


class Trainer:
    """Trains one model on the train split and evaluates on the eval split after each epoch."""

    def __init__(
        self,
        run_config: RunConfig,
        header: DatasetHeader,
        records: Sequence[UtteranceRecord],
        output_dir: Optional[Path] = None,
    ):
        self.run_config = run_config
        self.header = header
        self.output_dir = Path(output_dir or run_config.output_dir)
        self.model_config = resolve_model_config(run_config, header)
        self.model = AlignmentModel.initialize(self.model_config, derive_seed(run_config.seed, INIT_STREAM))

        self.builder = BatchBuilder(header, embedding_table_for(header), self.model_config)
        train_records = [r for r in records if r.split == "train"]
        eval_records = [r for r in records if r.split == "eval"]
        if not train_records:
            raise ConfigError("dataset has no train records")
        self.train_items = self.builder.prepare(train_records)
        self.eval_items = self.builder.prepare(eval_records)
        self.pool = scene_pool(train_records)

        self.steps_per_epoch = math.ceil(len(self.train_items) / run_config.batch_size)
        total_steps = self.steps_per_epoch * run_config.epochs if run_config.decay_to_zero else None
        schedule = LinearSchedule(run_config.learning_rate, run_config.warmup_steps, total_steps)
        self.optimizer = Adam(
            self.model.params.as_dict(),
            schedule,
            weight_decay=run_config.weight_decay,
            grad_clip=run_config.grad_clip,
        )
        self.evaluator = Evaluator(self.model, self.builder, run_config)
        self.metrics = MetricsRepository(self.output_dir / METRICS_FILE)
        self.eval_metrics = MetricsRepository(self.output_dir / EVAL_METRICS_FILE)
        self.checkpoints = CheckpointRepository(self.output_dir / CHECKPOINT_FILE)
        self.step = 0

    def epoch_batches(self, epoch: int) -> List[List[PreparedRecord]]:
        order = make_rng(self.run_config.seed, SHUFFLE_STREAM, epoch).permutation(len(self.train_items))
        size = self.run_config.batch_size
        return [[self.train_items[i] for i in order[start:start + size]] for start in range(0, len(order), size)]

    def train_step(self, items: Sequence[PreparedRecord], epoch: int) -> LossRecord:
        run = self.run_config
        step = self.step + 1
        batch = self.builder.build(
            items,
            make_rng(run.seed, BATCH_STREAM, step),
            p_mask=run.p_mask,
            p_corrupt=run.p_corrupt,
            pool=self.pool,
            use_alignment=run.use_alignment,
        )
        try:
            self.optimizer.zero_grad()
            bundle, _, _ = compute_losses(
                self.model,
                batch,
                run.top_k,
                run.loss_weights.as_dict(),
                epoch=epoch,
                vqa_start_epoch=run.vqa_start_epoch,
                rng=make_rng(run.seed, DROPOUT_STREAM, step),
            )
            bundle.total.backward()
            lr = self.optimizer.step()
        except NonFiniteError as e:
            raise TrainingDivergedError(e.message, step)
        self.step = step
        record = LossRecord(step=step, epoch=epoch, losses=bundle.values(), total=bundle.total.item(), lr=lr)
        logger.debug(f"step {step}: total {record.total:.4f} {record.losses}")
        return record

    def run(self) -> TrainingResult:
        run = self.run_config
        logger.info(
            f"🚀 Starting training: {len(self.train_items)} records, {run.epochs} epochs x "
            f"{self.steps_per_epoch} steps, alignment loss {'on' if run.use_alignment else 'off'}"
        )
        self.metrics.reset()
        self.eval_metrics.reset()
        result = TrainingResult(model=self.model, steps=0, output_dir=self.output_dir)

        for epoch in range(run.epochs):
            records = [self.train_step(items, epoch) for items in self.epoch_batches(epoch)]
            self.metrics.append_losses(records)
            report = self.evaluator.evaluate(self.eval_items, split="eval", epoch=epoch)
            self.eval_metrics.append_report(report)
            result.reports.append(report)
            self.checkpoints.save(self.model, run, epoch + 1, self.optimizer.state)
            logger.info(
                f"✅ Epoch {epoch} done: loss {np.mean([r.total for r in records]):.4f}, "
                f"qa {_fmt(report.qa_accuracy)}, recall@1 {_fmt(report.alignment_recall)}"
            )

        result.steps = self.step
        return result


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.3f}"
