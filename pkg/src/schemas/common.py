"""Common schemas."""

from typing import Any, Dict, Optional

from pydantic import BaseModel


class ErrorResponse(BaseModel):
    """One-line machine-parsable error printed to stderr."""
    error: str
    message: str


class CommandResult(BaseModel):
    """Summary line a command prints to stdout on success."""
    status: str = "ok"
    command: str
    data: Optional[Dict[str, Any]] = None
