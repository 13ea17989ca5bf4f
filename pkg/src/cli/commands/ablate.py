"""Ablation command."""

from typing import List, Optional

import click

from src.cli.output import get_dataset, get_run_config
from src.services.ablation import AblationService, check_seeds, render_table


def parse_seeds(ctx, param, value: str) -> List[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


@click.command("ablate")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Run config JSON.")
@click.option("--seeds", default="0,1,2", show_default=True, callback=parse_seeds, help="Comma-separated seeds.")
@click.option("--dataset", "dataset_path", type=click.Path(dir_okay=False), help="Overrides the config's dataset_path.")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Defaults to <output_dir>/ablation.")
def ablate(config_path: Optional[str], seeds: List[int], dataset_path: Optional[str], output_dir: Optional[str]):
    """Train every seed with and without the alignment loss and print the comparison table."""
    check_seeds(seeds)
    run_config = get_run_config(config_path)
    header, records = get_dataset(dataset_path or run_config.dataset_path)
    service = AblationService(run_config, header, records, output_dir or f"{run_config.output_dir}/ablation")
    report = service.run(seeds)
    click.echo(render_table(report))
