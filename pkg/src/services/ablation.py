"""Paired training runs with and without the alignment loss."""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from src.core.exceptions import ConfigError
from src.schemas.config import RunConfig
from src.schemas.metrics import AblationReport, AblationRow, AblationRun, MetricsReport
from src.schemas.world import DatasetHeader, UtteranceRecord
from src.services.trainer import Trainer

logger = logging.getLogger(__name__)

MIN_SEEDS = 3
REPORT_FILE = "ablation.json"
WITH_ALIGNMENT = "with alignment"
WITHOUT_ALIGNMENT = "without alignment"


def _value(report: Optional[MetricsReport], name: str) -> float:
    value = getattr(report, name, None) if report is not None else None
    if value is None:
        logger.warning(f"⚠️ {name} is undefined on the eval split, counting it as 0")
        return 0.0
    return float(value)


def _std(values: Sequence[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def check_seeds(seeds: Sequence[int]) -> List[int]:
    seeds = list(seeds)
    if len(seeds) < MIN_SEEDS:
        raise ConfigError(f"seeds: ablation needs at least {MIN_SEEDS} seeds, got {len(seeds)}")
    if any(seed < 0 for seed in seeds):
        raise ConfigError(f"seeds: seeds must be non-negative, got {seeds}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"seeds: duplicate seeds in {seeds}")
    return seeds


def summarize_runs(variant: str, runs: Iterable[AblationRun]) -> AblationRow:
    runs = list(runs)
    qa = [r.qa_accuracy for r in runs]
    pair = [r.pair_accuracy for r in runs]
    recall = [r.alignment_recall for r in runs]
    return AblationRow(
        variant=variant,
        qa_accuracy_mean=float(np.mean(qa)),
        qa_accuracy_std=_std(qa),
        pair_accuracy_mean=float(np.mean(pair)),
        pair_accuracy_std=_std(pair),
        alignment_recall_mean=float(np.mean(recall)),
        alignment_recall_std=_std(recall),
        attention_target_mass_mean=float(np.mean([r.attention_target_mass for r in runs])),
    )


def build_report(seeds: Sequence[int], runs: Sequence[AblationRun]) -> AblationReport:
    with_rows = summarize_runs(WITH_ALIGNMENT, (r for r in runs if r.use_alignment))
    without_rows = summarize_runs(WITHOUT_ALIGNMENT, (r for r in runs if not r.use_alignment))
    baseline_mass = without_rows.attention_target_mass_mean
    return AblationReport(
        seeds=list(seeds),
        rows=[with_rows, without_rows],
        delta_qa_accuracy=with_rows.qa_accuracy_mean - without_rows.qa_accuracy_mean,
        delta_pair_accuracy=with_rows.pair_accuracy_mean - without_rows.pair_accuracy_mean,
        delta_alignment_recall=with_rows.alignment_recall_mean - without_rows.alignment_recall_mean,
        attention_mass_ratio=with_rows.attention_target_mass_mean / baseline_mass if baseline_mass > 0 else None,
        runs=list(runs),
    )


def render_table(report: AblationReport) -> str:
    """Two-row comparison table followed by the per-seed runs."""
    lines = [
        f"{'variant':<20} {'qa_accuracy':>17} {'pair_accuracy':>17} {'alignment_recall@1':>20}",
    ]
    for row in report.rows:
        lines.append(
            f"{row.variant:<20} "
            f"{row.qa_accuracy_mean:>8.4f} ± {row.qa_accuracy_std:<6.4f} "
            f"{row.pair_accuracy_mean:>8.4f} ± {row.pair_accuracy_std:<6.4f} "
            f"{row.alignment_recall_mean:>11.4f} ± {row.alignment_recall_std:<6.4f}"
        )
    lines.append(
        f"{'delta':<20} {report.delta_qa_accuracy:>+8.4f}{'':9} {report.delta_pair_accuracy:>+8.4f}{'':9} "
        f"{report.delta_alignment_recall:>+11.4f}"
    )
    lines.append("")
    lines.append("per seed:")
    for run in report.runs:
        variant = WITH_ALIGNMENT if run.use_alignment else WITHOUT_ALIGNMENT
        lines.append(
            f"  seed {run.seed:<6} {variant:<20} qa {run.qa_accuracy:.4f}  pair {run.pair_accuracy:.4f}  "
            f"recall@1 {run.alignment_recall:.4f}  attention mass {run.attention_target_mass:.4f}"
        )
    return "\n".join(lines)


class AblationService:
    """Trains every seed twice, identical apart from the alignment loss switch."""

    def __init__(
        self,
        run_config: RunConfig,
        header: DatasetHeader,
        records: Sequence[UtteranceRecord],
        output_dir: Union[str, Path],
    ):
        self.run_config = run_config
        self.header = header
        self.records = records
        self.output_dir = Path(output_dir)

    def run_one(self, seed: int, use_alignment: bool) -> AblationRun:
        config = self.run_config.model_copy(update={"seed": seed, "use_alignment": use_alignment})
        variant = "align" if use_alignment else "no_align"
        result = Trainer(config, self.header, self.records, self.output_dir / f"seed_{seed}_{variant}").run()
        report = result.final_report
        return AblationRun(
            seed=seed,
            use_alignment=use_alignment,
            qa_accuracy=_value(report, "qa_accuracy"),
            pair_accuracy=_value(report, "pair_accuracy"),
            alignment_recall=_value(report, "alignment_recall"),
            attention_target_mass=_value(report, "attention_target_mass"),
        )

    def run(self, seeds: Sequence[int]) -> AblationReport:
        seeds = check_seeds(seeds)

        logger.info(f"🚀 Starting ablation over seeds {seeds}")
        runs: List[AblationRun] = []
        for seed in seeds:
            for use_alignment in (True, False):
                runs.append(self.run_one(seed, use_alignment))
        report = build_report(seeds, runs)

        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / REPORT_FILE
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        logger.info(
            f"✅ Ablation done: delta qa {report.delta_qa_accuracy:+.4f}, "
            f"delta pair {report.delta_pair_accuracy:+.4f}, "
            f"delta recall@1 {report.delta_alignment_recall:+.4f} ({path})"
        )
        return report
