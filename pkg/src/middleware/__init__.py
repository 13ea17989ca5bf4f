"""Middleware package."""

from .error_handler import add_error_handlers
from .logging import setup_logging_middleware

__all__ = ["add_error_handlers", "setup_logging_middleware"]
