"""CLI router configuration."""

import click

from src.cli.commands import ablate, data, evaluate, export, train
from src.core.config import settings
from src.utils.logging import setup_logging


@click.group(name=settings.PROJECT_NAME)
@click.version_option(settings.VERSION, prog_name=settings.PROJECT_NAME)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=None,
    help="Overrides LOG_LEVEL.",
)
def command_router(log_level):
    """Weakly supervised word-object alignment: data, training, evaluation, export."""
    setup_logging(level=log_level)


# Include sub-commands
command_router.add_command(data.gen_data)
command_router.add_command(train.train)
command_router.add_command(evaluate.evaluate)
command_router.add_command(export.export_attention)
command_router.add_command(ablate.ablate)
