"""Evaluation command."""

from typing import Optional

import click

from src.cli.output import emit, get_dataset, override_run_config
from src.repositories.checkpoint import CheckpointRepository
from src.services.batching import BatchBuilder
from src.services.dataset_builder import embedding_table_for
from src.services.evaluator import Evaluator, check_model_matches


@click.command("eval")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(dir_okay=False))
@click.option("--split", type=click.Choice(["train", "eval"]), default="eval", show_default=True)
@click.option("--layer", type=int, default=None, help="Inter-modality layer for attention metrics.")
def evaluate(checkpoint_path: str, dataset_path: str, split: str, layer: Optional[int]):
    """Compute the metrics report of a checkpoint on one split."""
    loaded = CheckpointRepository(checkpoint_path).load()
    header, records = get_dataset(dataset_path)
    check_model_matches(loaded.model, header)

    run_config = loaded.run_config
    if layer is not None:
        run_config = override_run_config(run_config, {"attention_layer": layer})
    builder = BatchBuilder(header, embedding_table_for(header), loaded.model.config)
    items = builder.prepare([r for r in records if r.split == split])
    report = Evaluator(loaded.model, builder, run_config).evaluate(items, split=split, epoch=loaded.epoch)
    emit("eval", report.model_dump())
