"""Logging setup: human-readable lines on stderr, JSON lines in a rotating file."""

import json
import logging
import logging.config
import os
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from src.core.config import settings

# attributes commands attach through ``extra=``
CONTEXT_FIELDS = ("run_id", "command")
CONSOLE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class JSONFormatter(logging.Formatter):
    """One JSON object per record, tagged with the service and command context."""

    def __init__(self, service_name: str):
        super().__init__()
        self.service_name = service_name

    def format(self, record: logging.LogRecord) -> str:
        entry: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "service": self.service_name,
            "logger": record.name,
            "message": record.getMessage(),
            "where": f"{record.module}.{record.funcName}:{record.lineno}",
        }
        for key in CONTEXT_FIELDS:
            value = getattr(record, key, None)
            if value is not None:
                entry[key] = value
        if record.exc_info:
            entry["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(entry)


def logging_config(level: str, log_file: str) -> Dict[str, Any]:
    """dictConfig schema; the file always records DEBUG, the console follows ``level``."""
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "json": {"()": JSONFormatter, "service_name": settings.SERVICE_NAME},
            "console": {"format": CONSOLE_FORMAT},
        },
        "handlers": {
            # stdout is reserved for command results
            "console": {
                "class": "logging.StreamHandler",
                "level": level,
                "formatter": "console",
                "stream": "ext://sys.stderr",
            },
            "file": {
                "class": "logging.handlers.RotatingFileHandler",
                "level": "DEBUG",
                "formatter": "json",
                "filename": log_file,
                "maxBytes": settings.LOG_MAX_BYTES,
                "backupCount": settings.LOG_BACKUP_COUNT,
                "encoding": "utf-8",
            },
        },
        "root": {"level": "DEBUG", "handlers": ["console", "file"]},
    }


def setup_logging(level: Optional[str] = None, log_directory: Optional[str] = None) -> None:
    level = (level or settings.LOG_LEVEL).upper()
    log_directory = log_directory or settings.LOG_DIRECTORY
    try:
        os.makedirs(log_directory, exist_ok=True)
    except OSError as e:
        # console-only logging still works without a log directory
        logging.basicConfig(level=level, format=CONSOLE_FORMAT)
        logging.getLogger(__name__).warning(f"⚠️ Cannot create log directory {log_directory}: {e}")
        return

    logging.config.dictConfig(logging_config(level, os.path.join(log_directory, f"{settings.SERVICE_NAME}.log")))
