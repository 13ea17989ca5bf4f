"""Command-line application for weakly supervised word-object alignment."""

import logging

import click

from src.cli.router import command_router
from src.middleware.error_handler import add_error_handlers
from src.middleware.logging import setup_logging_middleware

logger = logging.getLogger(__name__)


def create_application() -> click.Group:
    """Create and configure the CLI application."""
    # Command logging first so failures are logged before the error line is printed
    setup_logging_middleware(command_router)
    add_error_handlers(command_router)
    return command_router


# Create application instance
app = create_application()


if __name__ == "__main__":
    app()
