"""Helpers shared by the command modules."""

from typing import Any, Dict, List, Optional, Tuple

import click

from src.core.config import load_run_config
from src.repositories.dataset import DatasetRepository
from src.schemas.common import CommandResult
from src.schemas.config import RunConfig
from src.schemas.world import DatasetHeader, UtteranceRecord


def emit(command: str, data: Optional[Dict[str, Any]] = None) -> CommandResult:
    """Print one JSON result line to stdout."""
    result = CommandResult(command=command, data=data)
    click.echo(result.model_dump_json())
    return result


def get_run_config(config_path: Optional[str]) -> RunConfig:
    """Run config from ``config_path``, or the defaults when no file is given."""
    if config_path is None:
        return RunConfig()
    return load_run_config(config_path)


def get_dataset(path: str) -> Tuple[DatasetHeader, List[UtteranceRecord]]:
    return DatasetRepository(path).read()


def override_run_config(run_config: RunConfig, updates: Dict[str, Any]) -> RunConfig:
    """Apply command-line overrides, re-running field validation on the result."""
    if not updates:
        return run_config
    return RunConfig.model_validate({**run_config.model_dump(), **updates})
