"""Dataset generation command."""

from typing import Optional

import click

from src.cli.output import emit, get_run_config
from src.repositories.dataset import DatasetRepository
from src.services.dataset_builder import DatasetBuilder, summarize


@click.command("gen-data")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Run config JSON (world section is used).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Dataset file; defaults to the config's dataset_path.")
def gen_data(config_path: Optional[str], out_path: Optional[str]):
    """Generate the deterministic synthetic dataset and print summary counts."""
    run_config = get_run_config(config_path)
    header, records = DatasetBuilder(run_config.world).build()
    path = DatasetRepository(out_path or run_config.dataset_path).write(header, records)
    summary = summarize(header, records)
    emit("gen-data", {"path": str(path), **summary.as_dict()})
