"""
Benchmark Protocol
Runs the full comparison over several datasets: split each one, calibrate
BS, Heston and MSV on its in-sample half, build the error report, then pool
every metric row into one worst-value count and tabulate calibration times.

Timings are wall-clock; they stay out of the summary document and go to its
`.timing.json` sidecar.
"""

from __future__ import annotations

import statistics
from collections.abc import Sequence
from pathlib import Path

import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field

from src.calibration.calibrator import CalibrationConfig, CalibrationResult, calibrate, write_timing
from src.errors import InputValidationError
from src.evaluation.report import (
    MODELS,
    ErrorReport,
    WorstValueCounts,
    build_error_report,
    metric_rows,
    render_error_table,
    render_worst_counts,
    worst_value_counts,
)
from src.market_data.loader import split_in_out
from src.market_data.models import Dataset
from src.observability.metrics import track_stage
from src.pricing.models import ModelKind

logger = structlog.get_logger()


class TimingRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset_label: str
    seconds: dict[ModelKind, float]


class BenchmarkSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    reports: list[ErrorReport]
    worst_counts: WorstValueCounts
    timings: list[TimingRow] = Field(exclude=True)

    @property
    def speed_ratio(self) -> float:
        """Median Heston/MSV calibration time ratio across datasets."""
        return statistics.median(t.seconds[ModelKind.HESTON] / t.seconds[ModelKind.MSV] for t in self.timings)


def calibrate_all(in_sample: Dataset, base: CalibrationConfig) -> dict[ModelKind, CalibrationResult]:
    """Calibrate every model on one dataset with the budget of `base`."""
    return {m: calibrate(in_sample, base.model_copy(update={"model": m})) for m in MODELS}


def run_benchmark(datasets: Sequence[Dataset], base: CalibrationConfig) -> BenchmarkSummary:
    if not datasets:
        raise InputValidationError("benchmark needs at least one dataset")
    labels = [ds.label for ds in datasets]
    if len(set(labels)) != len(labels):
        raise InputValidationError(f"dataset labels must be unique, got {labels}")

    reports = []
    timings = []
    for ds in datasets:
        with track_stage("benchmark_dataset"):
            in_sample, _ = split_in_out(ds)
            calibrations = calibrate_all(in_sample, base)
            reports.append(build_error_report(ds, calibrations))
        timings.append(
            TimingRow(
                dataset_label=ds.label,
                seconds={m: calibrations[m].elapsed_seconds or 0.0 for m in MODELS},
            )
        )
        logger.info(
            "Benchmark dataset done",
            dataset=ds.label,
            seconds={m.value: s for m, s in timings[-1].seconds.items()},
        )

    rows = [row for report in reports for row in metric_rows(report)]
    return BenchmarkSummary(reports=reports, worst_counts=worst_value_counts(rows), timings=timings)


def render_timing_table(timings: Sequence[TimingRow]) -> str:
    frame = pd.DataFrame.from_records(
        [{"dataset": t.dataset_label, **{m.value: f"{t.seconds[m]:.2f}" for m in MODELS}} for t in timings],
        columns=["dataset"] + [m.value for m in MODELS],
    )
    return "Calibration time (s)\n" + frame.to_string(index=False) + "\n"


def render_benchmark(summary: BenchmarkSummary) -> str:
    parts = [render_error_table(report) for report in summary.reports]
    parts.append(render_worst_counts(summary.worst_counts))
    parts.append(render_timing_table(summary.timings))
    parts.append(f"Median Heston/MSV time ratio: {summary.speed_ratio:.1f}\n")
    return "\n".join(parts)


def write_benchmark(summary: BenchmarkSummary, path: Path) -> Path:
    """Write the summary document and its calibration-time sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    rows = [{"dataset_label": t.dataset_label} | {m.value: t.seconds[m] for m in MODELS} for t in summary.timings]
    write_timing(path, {"timings": rows})
    return path
