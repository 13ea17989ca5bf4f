"""Attention export command."""

from typing import Optional

import click

from src.cli.output import emit, get_dataset
from src.core.config import settings
from src.repositories.checkpoint import CheckpointRepository
from src.services.attention_export import AttentionExporter, find_record
from src.services.evaluator import check_model_matches
from src.services.pipeline import resolve_attention_layer


@click.command("export-attention")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(dir_okay=False))
@click.option("--record-id", required=True, type=int)
@click.option("--layer", type=int, default=None, help="Defaults to the checkpoint's configured attention layer.")
@click.option("--sum-heads", is_flag=True, default=False, help="Write one matrix summed over heads.")
@click.option("--out-dir", default=f"{settings.OUTPUT_ROOT}/attention", show_default=True, type=click.Path(file_okay=False))
def export_attention(
    checkpoint_path: str,
    dataset_path: str,
    record_id: int,
    layer: Optional[int],
    sum_heads: bool,
    out_dir: str,
):
    """Write the word x object cross-attention of one record as CSV plus a JSON sidecar."""
    loaded = CheckpointRepository(checkpoint_path).load()
    header, records = get_dataset(dataset_path)
    check_model_matches(loaded.model, header)
    if layer is None:
        layer = resolve_attention_layer(loaded.run_config, loaded.model.config)

    exporter = AttentionExporter(loaded.model, header)
    sidecar = exporter.export(find_record(records, record_id), layer, out_dir, sum_heads=sum_heads)
    emit("export-attention", {"out_dir": out_dir, **sidecar.model_dump(include={"record_id", "layer", "files", "predicted_answer"})})
