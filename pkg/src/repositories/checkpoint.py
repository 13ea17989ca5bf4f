"""Versioned JSON checkpoints: parameters, optimizer state and the configs that made them."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from pydantic import ValidationError

from src.core.config import format_validation_error, settings
from src.core.exceptions import CheckpointError
from src.models.model import AlignmentModel
from src.numeric.optim import AdamState, LinearSchedule
from src.schemas.checkpoint import ArrayBlob, CheckpointFile, OptimizerState, ScheduleState
from src.schemas.config import RunConfig

logger = logging.getLogger(__name__)


@dataclass
class LoadedCheckpoint:
    model: AlignmentModel
    run_config: RunConfig
    epoch: int
    optimizer: Optional[AdamState]


def optimizer_to_schema(state: AdamState) -> OptimizerState:
    schedule = state.schedule
    return OptimizerState(
        step=state.step,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        weight_decay=state.weight_decay,
        schedule=ScheduleState(
            base_lr=schedule.base_lr, warmup_steps=schedule.warmup_steps, total_steps=schedule.total_steps
        ),
        first_moment={k: ArrayBlob.from_array(v) for k, v in state.first_moment.items()},
        second_moment={k: ArrayBlob.from_array(v) for k, v in state.second_moment.items()},
    )


def optimizer_from_schema(schema: OptimizerState) -> AdamState:
    return AdamState(
        schedule=LinearSchedule(
            base_lr=schema.schedule.base_lr,
            warmup_steps=schema.schedule.warmup_steps,
            total_steps=schema.schedule.total_steps,
        ),
        beta1=schema.beta1,
        beta2=schema.beta2,
        epsilon=schema.epsilon,
        weight_decay=schema.weight_decay,
        step=schema.step,
        first_moment={k: v.to_array() for k, v in schema.first_moment.items()},
        second_moment={k: v.to_array() for k, v in schema.second_moment.items()},
    )


class CheckpointRepository:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def save(
        self,
        model: AlignmentModel,
        run_config: RunConfig,
        epoch: int,
        optimizer: Optional[AdamState] = None,
    ) -> Path:
        checkpoint = CheckpointFile(
            format_version=settings.CHECKPOINT_FORMAT_VERSION,
            epoch=epoch,
            model=model.config,
            run_config=run_config,
            parameters={name: ArrayBlob.from_array(p.data) for name, p in model.params.items()},
            optimizer=optimizer_to_schema(optimizer) if optimizer is not None else None,
        )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(checkpoint.model_dump_json(), encoding="utf-8")
        tmp.replace(self.path)
        logger.debug(f"Saved checkpoint for epoch {epoch} to {self.path}")
        return self.path

    def load(self) -> LoadedCheckpoint:
        """Rebuild the model and optimizer state; shapes must match the stored config."""
        try:
            raw = self.path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise CheckpointError(f"checkpoint not found: {self.path}")
        try:
            checkpoint = CheckpointFile.model_validate(json.loads(raw))
        except json.JSONDecodeError as e:
            raise CheckpointError(f"{self.path}: malformed JSON: {e.msg}")
        except ValidationError as e:
            raise CheckpointError(f"{self.path}: {format_validation_error(e)}")
        if checkpoint.format_version != settings.CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(
                f"checkpoint format {checkpoint.format_version} is not supported "
                f"(expected {settings.CHECKPOINT_FORMAT_VERSION})"
            )

        # seed is irrelevant, every value is overwritten below
        model = AlignmentModel.initialize(checkpoint.model, seed=0)
        model.params.load_state_dict({name: blob.to_array() for name, blob in checkpoint.parameters.items()})
        optimizer = optimizer_from_schema(checkpoint.optimizer) if checkpoint.optimizer is not None else None
        return LoadedCheckpoint(model=model, run_config=checkpoint.run_config, epoch=checkpoint.epoch, optimizer=optimizer)
