"""JSON-lines metric logs. No timestamps, so identical runs give identical files."""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Union

from src.schemas.metrics import LossRecord, MetricsReport

logger = logging.getLogger(__name__)


class MetricsRepository:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def reset(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")

    def append(self, rows: Iterable[Dict]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8", newline="\n") as f:
            for row in rows:
                f.write(json.dumps(row, separators=(",", ":")))
                f.write("\n")

    def append_losses(self, records: Iterable[LossRecord]) -> None:
        self.append(record.as_line() for record in records)

    def append_report(self, report: MetricsReport) -> None:
        self.append([report.model_dump()])

    def read(self) -> List[Dict]:
        if not self.path.exists():
            return []
        with self.path.open("r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]

    def read_reports(self) -> List[MetricsReport]:
        return [MetricsReport.model_validate(row) for row in self.read()]
