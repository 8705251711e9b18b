"""
Evaluation Reports
In-sample / out-of-sample error reports, per-quote Black-Scholes versus
stochastic-volatility comparisons, worst-value counts and their text tables.

Every report is built from a dataset and calibrations fitted on its in-sample
half. Calibrations carry the fingerprint of the quotes they were fitted on;
a calibration whose fingerprint is not the in-sample half's is a leak.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Literal

import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, computed_field, model_validator

from src.calibration.calibrator import CalibrationResult, read_timing, write_timing
from src.errors import InputValidationError
from src.evaluation.metrics import compare_dummy, mrae, relative_error, rmse
from src.market_data.loader import split_in_out
from src.market_data.models import Dataset
from src.pricing.engine import price_dataset
from src.pricing.models import ModelKind
from src.pricing.msv import DEFAULT_ORDER

logger = structlog.get_logger()

MODELS = (ModelKind.BS, ModelKind.HESTON, ModelKind.MSV)
SV_MODELS = (ModelKind.HESTON, ModelKind.MSV)
METRICS = ("MRAE-I", "RMSE-I", "MRAE-O", "RMSE-O")

Sample = Literal["in", "out"]


# ─── Documents ────────────────────────────────────────────────

class ModelErrors(BaseModel):
    """Errors of one model on one dataset. Out-of-sample fields are None when the out half is empty."""

    model_config = ConfigDict(frozen=True)

    model: ModelKind
    mrae_in: float = Field(..., ge=0)
    rmse_in: float = Field(..., ge=0)
    mrae_out: float | None = Field(default=None, ge=0)
    rmse_out: float | None = Field(default=None, ge=0)
    calib_seconds: float | None = Field(default=None, exclude=True)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def mrae_in_pct(self) -> float:
        return 100.0 * self.mrae_in

    @computed_field  # type: ignore[prop-decorator]
    @property
    def mrae_out_pct(self) -> float | None:
        return None if self.mrae_out is None else 100.0 * self.mrae_out

    def metric(self, name: str) -> float | None:
        return {
            "MRAE-I": self.mrae_in,
            "RMSE-I": self.rmse_in,
            "MRAE-O": self.mrae_out,
            "RMSE-O": self.rmse_out,
        }[name]


class ErrorReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset_label: str
    n_in: int
    n_out: int
    models: list[ModelErrors]
    leak_flagged: bool = False

    def for_model(self, model: ModelKind) -> ModelErrors:
        for errors in self.models:
            if errors.model is model:
                return errors
        raise KeyError(model.value)


class ComparisonRow(BaseModel):
    """One quote priced by Black-Scholes and one stochastic-volatility model."""

    model_config = ConfigDict(frozen=True)

    quote_id: str
    sample: Sample
    sv_model: ModelKind
    real_price: float
    bs_price: float
    sv_price: float
    bs_err: float = Field(..., ge=0)
    sv_err: float = Field(..., ge=0)
    dummy: Literal[0, 1]

    @model_validator(mode="after")
    def check_dummy(self) -> ComparisonRow:
        if self.dummy != compare_dummy(self.bs_err, self.sv_err):
            raise ValueError(f"dummy {self.dummy} inconsistent with errors ({self.bs_err}, {self.sv_err})")
        return self


class PriceRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    quote_id: str
    sample: Sample
    strike: float
    tau: float
    market: float
    bs: float
    heston: float
    msv: float


class MetricRow(BaseModel):
    """One row of the worst-value table: a metric on a dataset across the three models."""

    model_config = ConfigDict(frozen=True)

    dataset_label: str
    metric: str
    values: dict[ModelKind, float]

    @property
    def sample(self) -> Sample:
        return "in" if self.metric.endswith("-I") else "out"


class WorstValueCounts(BaseModel):
    model_config = ConfigDict(frozen=True)

    in_sample: dict[ModelKind, int]
    out_sample: dict[ModelKind, int]

    def total(self, model: ModelKind) -> int:
        return self.in_sample[model] + self.out_sample[model]

    @property
    def n_rows(self) -> int:
        return sum(self.in_sample.values()) + sum(self.out_sample.values())


class EvaluationDocument(BaseModel):
    """Everything `volcal evaluate` writes for one dataset."""

    model_config = ConfigDict(frozen=True)

    report: ErrorReport
    comparisons: list[ComparisonRow]
    prices: list[PriceRow]
    worst_counts: WorstValueCounts


# ─── Building ─────────────────────────────────────────────────

def _check_calibrations(
    calibrations: Mapping[ModelKind, CalibrationResult], in_sample: Dataset, strict: bool
) -> bool:
    missing = [m.value for m in MODELS if m not in calibrations]
    if missing:
        raise InputValidationError(f"missing calibrations for {missing}")
    expected = in_sample.fingerprint()
    leaked = []
    for model in MODELS:
        result = calibrations[model]
        if result.model is not model:
            raise InputValidationError(f"calibration given for {model.value} is a {result.model.value} calibration")
        if result.dataset_fingerprint != expected:
            leaked.append(model.value)
    if not leaked:
        return False
    message = f"calibrations {leaked} were not fitted on the in-sample half of {in_sample.label!r}"
    if strict:
        raise InputValidationError(message)
    logger.warning("Calibration leak allowed", models=leaked, dataset=in_sample.label)
    return True


def _order(result: CalibrationResult) -> int:
    return int(result.config.get("order", DEFAULT_ORDER))


def _model_prices(
    calibrations: Mapping[ModelKind, CalibrationResult], half: Dataset
) -> dict[ModelKind, list[float]]:
    if len(half) == 0:
        return {m: [] for m in MODELS}
    return {
        m: price_dataset(m, calibrations[m].typed_params(), half, order=_order(calibrations[m])).tolist()
        for m in MODELS
    }


def build_error_report(
    ds: Dataset,
    calibrations: Mapping[ModelKind, CalibrationResult],
    strict: bool = True,
) -> ErrorReport:
    """MRAE/RMSE per model on the in-sample half and, without refitting, on the out-sample half.

    Raises:
        InputValidationError: a calibration was not fitted on the in-sample
            half (unless strict=False, which flags the report instead).
    """
    in_sample, out_sample = split_in_out(ds)
    leak = _check_calibrations(calibrations, in_sample, strict)
    prices_in = _model_prices(calibrations, in_sample)
    prices_out = _model_prices(calibrations, out_sample)
    market_in = [q.mid_price for q in in_sample.quotes]
    market_out = [q.mid_price for q in out_sample.quotes]

    models = []
    for m in MODELS:
        has_out = len(out_sample) > 0
        models.append(
            ModelErrors(
                model=m,
                mrae_in=mrae(prices_in[m], market_in),
                rmse_in=rmse(prices_in[m], market_in),
                mrae_out=mrae(prices_out[m], market_out) if has_out else None,
                rmse_out=rmse(prices_out[m], market_out) if has_out else None,
                calib_seconds=None if m is ModelKind.BS else calibrations[m].elapsed_seconds,
            )
        )
    return ErrorReport(
        dataset_label=ds.label,
        n_in=len(in_sample),
        n_out=len(out_sample),
        models=models,
        leak_flagged=leak,
    )


def build_comparison_rows(
    ds: Dataset,
    calibrations: Mapping[ModelKind, CalibrationResult],
) -> list[ComparisonRow]:
    """Per-quote BS-vs-Heston and BS-vs-MSV rows, in canonical quote order."""
    rows = []
    for sample, half in zip(("in", "out"), split_in_out(ds)):
        prices = _model_prices(calibrations, half)
        for i, quote in enumerate(half.quotes):
            bs_price = prices[ModelKind.BS][i]
            bs_err = relative_error(bs_price, quote.mid_price)
            for sv in SV_MODELS:
                sv_price = prices[sv][i]
                sv_err = relative_error(sv_price, quote.mid_price)
                rows.append(
                    ComparisonRow(
                        quote_id=quote.quote_id,
                        sample=sample,
                        sv_model=sv,
                        real_price=quote.mid_price,
                        bs_price=bs_price,
                        sv_price=sv_price,
                        bs_err=bs_err,
                        sv_err=sv_err,
                        dummy=compare_dummy(bs_err, sv_err),
                    )
                )
    return rows


def build_price_rows(ds: Dataset, calibrations: Mapping[ModelKind, CalibrationResult]) -> list[PriceRow]:
    rows = []
    for sample, half in zip(("in", "out"), split_in_out(ds)):
        prices = _model_prices(calibrations, half)
        for i, quote in enumerate(half.quotes):
            rows.append(
                PriceRow(
                    quote_id=quote.quote_id,
                    sample=sample,
                    strike=quote.strike,
                    tau=quote.tau,
                    market=quote.mid_price,
                    bs=prices[ModelKind.BS][i],
                    heston=prices[ModelKind.HESTON][i],
                    msv=prices[ModelKind.MSV][i],
                )
            )
    return rows


def metric_rows(report: ErrorReport) -> list[MetricRow]:
    """Metric rows of a report; out-of-sample rows are omitted when there is no out half."""
    rows = []
    for metric in METRICS:
        values = {m: report.for_model(m).metric(metric) for m in MODELS}
        if any(v is None for v in values.values()):
            continue
        rows.append(MetricRow(dataset_label=report.dataset_label, metric=metric, values=values))
    return rows


def worst_value_counts(rows: Sequence[MetricRow]) -> WorstValueCounts:
    """Count, per model, the rows in which it has the largest error.

    Each row blames exactly one model; ties go to BS, then Heston, then MSV.

    Raises:
        InputValidationError: a row lacks one of the three models or holds a
            negative or nonfinite value.
    """
    in_counts = {m: 0 for m in MODELS}
    out_counts = {m: 0 for m in MODELS}
    for row in rows:
        if set(row.values) != set(MODELS):
            raise InputValidationError(f"row {row.dataset_label}/{row.metric} must hold bs, heston and msv values")
        values = [row.values[m] for m in MODELS]
        if any(not (math.isfinite(v) and v >= 0) for v in values):
            raise InputValidationError(f"row {row.dataset_label}/{row.metric} holds invalid values {values}")
        worst = max(values)
        blamed = next(m for m in MODELS if row.values[m] == worst)
        (in_counts if row.sample == "in" else out_counts)[blamed] += 1
    return WorstValueCounts(in_sample=in_counts, out_sample=out_counts)


def evaluate_dataset(
    ds: Dataset,
    calibrations: Mapping[ModelKind, CalibrationResult],
    strict: bool = True,
) -> EvaluationDocument:
    report = build_error_report(ds, calibrations, strict=strict)
    return EvaluationDocument(
        report=report,
        comparisons=build_comparison_rows(ds, calibrations),
        prices=build_price_rows(ds, calibrations),
        worst_counts=worst_value_counts(metric_rows(report)),
    )


def write_evaluation(doc: EvaluationDocument, path: Path) -> Path:
    """Write the evaluation document; calibration wall times go to its timing sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(doc.model_dump_json(indent=2) + "\n", encoding="utf-8")
    seconds = {e.model.value: e.calib_seconds for e in doc.report.models if e.calib_seconds is not None}
    if seconds:
        write_timing(path, {"calib_seconds": seconds})
    return path


def read_evaluation(path: Path) -> EvaluationDocument:
    try:
        doc = EvaluationDocument.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as e:
        raise InputValidationError(f"cannot read evaluation file {path}: {e}") from e
    except ValidationError as e:
        raise InputValidationError(f"invalid evaluation file {path}: {e.errors()[0]['msg']}") from e

    seconds = read_timing(path).get("calib_seconds")
    if not isinstance(seconds, dict):
        return doc
    models = [
        e.model_copy(update={"calib_seconds": float(seconds[e.model.value])})
        if isinstance(seconds.get(e.model.value), (int, float)) else e
        for e in doc.report.models
    ]
    return doc.model_copy(update={"report": doc.report.model_copy(update={"models": models})})


# ─── Text Tables ──────────────────────────────────────────────

def _fmt(value: float | None, digits: int = 4) -> str:
    return "Nil" if value is None else f"{value:.{digits}f}"


def render_error_table(report: ErrorReport) -> str:
    """Metric rows against model columns, with the worst value of each row starred."""
    records = []
    for row in metric_rows(report):
        worst = max(row.values.values())
        blamed = next(m for m in MODELS if row.values[m] == worst)
        records.append(
            {"metric": row.metric}
            | {m.value: _fmt(row.values[m]) + ("*" if m is blamed else "") for m in MODELS}
        )
    records.append(
        {"metric": "Time"} | {m.value: _fmt(report.for_model(m).calib_seconds, 2) for m in MODELS}
    )
    frame = pd.DataFrame.from_records(records, columns=["metric"] + [m.value for m in MODELS])
    title = f"{report.dataset_label} (in={report.n_in}, out={report.n_out})"
    if report.leak_flagged:
        title += " [LEAK]"
    return title + "\n" + frame.to_string(index=False) + "\n"


def render_comparison_table(rows: Sequence[ComparisonRow]) -> str:
    frame = pd.DataFrame.from_records(
        [
            {
                "quote_id": r.quote_id,
                "sample": r.sample,
                "sv": r.sv_model.value,
                "real": f"{r.real_price:.2f}",
                "bs": f"{r.bs_price:.2f}",
                "sv_price": f"{r.sv_price:.2f}",
                "bs_err": f"{r.bs_err:.4f}",
                "sv_err": f"{r.sv_err:.4f}",
                "compare": r.dummy,
            }
            for r in rows
        ],
        columns=["quote_id", "sample", "sv", "real", "bs", "sv_price", "bs_err", "sv_err", "compare"],
    )
    return frame.to_string(index=False) + "\n"


def render_worst_counts(counts: WorstValueCounts) -> str:
    frame = pd.DataFrame.from_records(
        [
            {"sample": "In", **{m.value: counts.in_sample[m] for m in MODELS}},
            {"sample": "Out", **{m.value: counts.out_sample[m] for m in MODELS}},
            {"sample": "Total", **{m.value: counts.total(m) for m in MODELS}},
        ],
        columns=["sample"] + [m.value for m in MODELS],
    )
    return "Worst values\n" + frame.to_string(index=False) + "\n"
