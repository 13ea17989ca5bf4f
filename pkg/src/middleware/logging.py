"""Command logging middleware."""

import functools
import logging
import time
import uuid
from typing import Callable

import click

logger = logging.getLogger(__name__)


class CommandLoggingMiddleware:
    """Logs start, completion and failure of one command, tagged with a run id."""

    def __init__(self, name: str, callback: Callable):
        self.name = name
        self.callback = callback
        functools.update_wrapper(self, callback)
        self.__logged__ = True

    def __call__(self, *args, **kwargs):
        # Generate unique run ID
        run_id = str(uuid.uuid4())
        ctx = click.get_current_context(silent=True)
        if ctx is not None:
            ctx.meta["run_id"] = run_id
        extra = {"run_id": run_id, "command": self.name}

        logger.info(f"Command {run_id} started: {self.name}", extra=extra)
        start_time = time.perf_counter()

        try:
            result = self.callback(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except Exception as e:
            process_time = time.perf_counter() - start_time
            logger.error(
                f"Command {run_id} failed: {self.name} - Error: {e} - Duration: {process_time:.4f}s",
                extra=extra,
            )
            raise

        process_time = time.perf_counter() - start_time
        logger.info(f"Command {run_id} completed: {self.name} - Duration: {process_time:.4f}s", extra=extra)
        return result


def setup_logging_middleware(group: click.Group) -> None:
    """Attach command logging to every command of ``group``."""
    for name, command in group.commands.items():
        if not getattr(command.callback, "__logged__", False):
            command.callback = CommandLoggingMiddleware(name, command.callback)
