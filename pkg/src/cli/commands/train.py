"""Training command."""

from typing import Optional

import click

from src.cli.output import emit, get_dataset, get_run_config, override_run_config
from src.services.trainer import Trainer


@click.command("train")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Run config JSON.")
@click.option("--dataset", "dataset_path", type=click.Path(dir_okay=False), help="Overrides the config's dataset_path.")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Overrides the config's output_dir.")
@click.option("--no-align", is_flag=True, default=False, help="Train without the alignment loss.")
@click.option("--seed", type=int, default=None, help="Overrides the config's seed.")
def train(
    config_path: Optional[str],
    dataset_path: Optional[str],
    output_dir: Optional[str],
    no_align: bool,
    seed: Optional[int],
):
    """Train a model; writes metrics.jsonl, eval_metrics.jsonl and checkpoint.json."""
    run_config = get_run_config(config_path)
    updates = {}
    if no_align:
        updates["use_alignment"] = False
    if seed is not None:
        updates["seed"] = seed
    if output_dir is not None:
        updates["output_dir"] = output_dir
    if dataset_path is not None:
        updates["dataset_path"] = dataset_path
    run_config = override_run_config(run_config, updates)

    header, records = get_dataset(run_config.dataset_path)
    result = Trainer(run_config, header, records).run()
    report = result.final_report
    emit(
        "train",
        {
            "output_dir": str(result.output_dir),
            "steps": result.steps,
            "use_alignment": run_config.use_alignment,
            "final_report": report.model_dump() if report is not None else None,
        },
    )
