"""Global error handling for CLI commands."""

import functools
import logging
import traceback
from typing import Callable, Dict, Tuple, Type

import click
from pydantic import ValidationError

from src.core.config import format_validation_error
from src.core.exceptions import ConfigError, WeakAlignError
from src.schemas.common import ErrorResponse

logger = logging.getLogger(__name__)

IO_EXIT_CODE = 3
INTERNAL_EXIT_CODE = 70

Handler = Callable[[BaseException], Tuple[ErrorResponse, int]]


def validation_exception_handler(exc: ValidationError) -> Tuple[ErrorResponse, int]:
    """Handle validation errors raised outside the config loader."""
    message = format_validation_error(exc)
    logger.error(f"Validation error: {message}")
    return ErrorResponse(error=ConfigError.code, message=message), ConfigError.exit_code


def domain_exception_handler(exc: WeakAlignError) -> Tuple[ErrorResponse, int]:
    logger.error(f"{exc.code}: {exc.message}")
    return ErrorResponse(error=exc.code, message=exc.message), exc.exit_code


def os_exception_handler(exc: OSError) -> Tuple[ErrorResponse, int]:
    logger.error(f"I/O error: {exc}")
    return ErrorResponse(error="io_error", message=str(exc)), IO_EXIT_CODE


def general_exception_handler(exc: Exception) -> Tuple[ErrorResponse, int]:
    """Handle all other exceptions."""
    error_traceback = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__))
    logger.error(f"Unhandled exception: {exc}\n{error_traceback}")
    return ErrorResponse(error="internal_error", message=str(exc) or type(exc).__name__), INTERNAL_EXIT_CODE


EXCEPTION_HANDLERS: Dict[Type[BaseException], Handler] = {}


def add_exception_handler(exc_type: Type[BaseException], handler: Handler) -> None:
    EXCEPTION_HANDLERS[exc_type] = handler


def handle_exception(exc: BaseException) -> int:
    """Print the one-line error for ``exc`` to stderr and return the exit code.

    The most specific registered handler along the exception's MRO wins.
    """
    for klass in type(exc).__mro__:
        handler = EXCEPTION_HANDLERS.get(klass)
        if handler is not None:
            break
    else:
        handler = general_exception_handler
    response, exit_code = handler(exc)
    click.echo(response.model_dump_json(), err=True)
    return exit_code


def guard(callback: Callable) -> Callable:
    @functools.wraps(callback)
    def wrapper(*args, **kwargs):
        try:
            return callback(*args, **kwargs)
        except (click.exceptions.Exit, click.exceptions.Abort, click.ClickException):
            raise
        except Exception as exc:
            raise SystemExit(handle_exception(exc))

    wrapper.__guarded__ = True
    return wrapper


add_exception_handler(ValidationError, validation_exception_handler)
add_exception_handler(WeakAlignError, domain_exception_handler)
add_exception_handler(OSError, os_exception_handler)
add_exception_handler(Exception, general_exception_handler)


def add_error_handlers(group: click.Group) -> None:
    """Wrap every command of ``group`` so failures exit with a machine-parsable line."""
    for command in group.commands.values():
        if not getattr(command.callback, "__guarded__", False):
            command.callback = guard(command.callback)
