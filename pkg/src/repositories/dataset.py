"""Dataset file persistence: a JSON header line followed by one JSON record per line."""

import json
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

from pydantic import ValidationError

from src.core.config import format_validation_error, settings
from src.core.exceptions import DatasetFormatError
from src.schemas.world import DatasetHeader, UtteranceRecord

logger = logging.getLogger(__name__)


class DatasetRepository:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def write(self, header: DatasetHeader, records: Sequence[UtteranceRecord]) -> Path:
        """Write the header and records. Output bytes depend only on the inputs."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", encoding="utf-8", newline="\n") as f:
            f.write(header.model_dump_json())
            f.write("\n")
            for record in records:
                f.write(record.model_dump_json())
                f.write("\n")
        logger.info(f"💾 Wrote {len(records)} records to {self.path}")
        return self.path

    def read_header(self) -> DatasetHeader:
        with self._open() as f:
            first = f.readline()
        return self._parse_header(first)

    def read(self) -> Tuple[DatasetHeader, List[UtteranceRecord]]:
        """Load and validate every line; errors name the 1-based line number."""
        with self._open() as f:
            lines = f.read().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        else:
            # a file that does not end in a newline was cut short
            if lines:
                raise DatasetFormatError("file is truncated (missing final newline)", line=len(lines))
        if not lines:
            raise DatasetFormatError("file is empty, expected a header", line=1)

        header = self._parse_header(lines[0])
        records = []
        for number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                raise DatasetFormatError("blank line", line=number)
            try:
                records.append(UtteranceRecord.model_validate(json.loads(line)))
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"malformed JSON: {e.msg}", line=number)
            except ValidationError as e:
                raise DatasetFormatError(format_validation_error(e), line=number)
        logger.debug(f"Read {len(records)} records from {self.path}")
        return header, records

    def _open(self):
        try:
            return self.path.open("r", encoding="utf-8", newline="")
        except FileNotFoundError:
            raise DatasetFormatError(f"dataset file not found: {self.path}")

    def _parse_header(self, line: str) -> DatasetHeader:
        if not line.strip():
            raise DatasetFormatError("file is empty, expected a header", line=1)
        try:
            header = DatasetHeader.model_validate(json.loads(line))
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"malformed header: {e.msg}", line=1)
        except ValidationError as e:
            raise DatasetFormatError(f"bad header: {format_validation_error(e)}", line=1)
        if header.format_version != settings.DATASET_FORMAT_VERSION:
            raise DatasetFormatError(
                f"format version {header.format_version} is not supported (expected {settings.DATASET_FORMAT_VERSION})",
                line=1,
            )
        return header
