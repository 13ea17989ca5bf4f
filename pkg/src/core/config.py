"""Application settings and run-configuration loading."""

import json
from pathlib import Path
from typing import Union

from pydantic import ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.exceptions import ConfigError
from src.schemas.config import RunConfig


class Settings(BaseSettings):
    """Process-wide settings with environment variable loading."""

    PROJECT_NAME: str = "weakalign"
    VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Logging
    SERVICE_NAME: str = "weakalign"
    LOG_DIRECTORY: str = "logs"
    LOG_LEVEL: str = "INFO"
    LOG_MAX_BYTES: int = 10 * 1024 * 1024  # 10MB
    LOG_BACKUP_COUNT: int = 5

    # Artifacts
    OUTPUT_ROOT: str = "runs"
    CHECKPOINT_FORMAT_VERSION: int = 1
    DATASET_FORMAT_VERSION: int = 1

    @field_validator("LOG_LEVEL")
    def normalize_log_level(cls, v: str) -> str:
        """Accept lower-case level names."""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


def format_validation_error(exc: ValidationError) -> str:
    """Flatten a pydantic error into ``field.path: message`` parts."""
    details = []
    for error in exc.errors():
        location = ".".join(str(loc) for loc in error["loc"]) or "<root>"
        details.append(f"{location}: {error['msg']}")
    return "; ".join(details)


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a JSON run configuration."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e.msg} (line {e.lineno})")

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e))


# Create global settings instance
settings = Settings()
