"""
Quote Loader
Parses, validates, serializes and splits option-quote CSV files.

Canonical schema (UTF-8, comma-separated, '.' decimal, header required):

    quote_id,trade_date,spot,strike,tau_years,rate,mid_price

`expiry_date` may replace `tau_years`; tau is then derived ACT/365 fixed from
the trade date. Any other column is rejected.
"""

from __future__ import annotations

import io
from datetime import date
from pathlib import Path

import pandas as pd
import structlog
from pydantic import ValidationError

from src.errors import InputValidationError
from src.market_data.models import Dataset, Quote

logger = structlog.get_logger()

CANONICAL_COLUMNS = ["quote_id", "trade_date", "spot", "strike", "tau_years", "rate", "mid_price"]
EXPIRY_COLUMNS = ["quote_id", "trade_date", "spot", "strike", "expiry_date", "rate", "mid_price"]
DAYS_PER_YEAR = 365.0


def _year_fraction(trade_date: date, expiry: date) -> float:
    return (expiry - trade_date).days / DAYS_PER_YEAR


def _parse_row(row: dict[str, str], line_no: int, has_tau: bool) -> Quote:
    missing = [k for k, v in row.items() if not isinstance(v, str) or not v.strip()]
    if missing:
        raise InputValidationError(f"row {line_no}: malformed row, missing {missing}")
    quote_id = row["quote_id"].strip()
    try:
        trade_date = date.fromisoformat(row["trade_date"].strip())
        if has_tau:
            tau = float(row["tau_years"])
        else:
            tau = _year_fraction(trade_date, date.fromisoformat(row["expiry_date"].strip()))
        fields = {
            "quote_id": quote_id,
            "trade_date": trade_date,
            "spot": float(row["spot"]),
            "strike": float(row["strike"]),
            "tau": tau,
            "rate": float(row["rate"]),
            "mid_price": float(row["mid_price"]),
        }
    except (KeyError, ValueError) as e:
        raise InputValidationError(f"row {line_no}: malformed value ({e})") from e

    try:
        return Quote(**fields)
    except ValidationError as e:
        reasons = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'quote'}: {err['msg']}" for err in e.errors())
        raise InputValidationError(f"row {line_no}: quote {quote_id or '?'} violates invariants ({reasons})") from e


def parse_quotes(csv_text: str, label: str | None = None) -> Dataset:
    """Parse CSV text into a canonically ordered Dataset.

    Args:
        csv_text: Full file contents including the header row.
        label: Dataset label. Defaults to the trade date.

    Raises:
        InputValidationError: empty input, bad header, malformed rows or
            rows violating a Quote invariant. Row numbers count the header
            as line 1.
    """
    csv_text = csv_text.removeprefix("\ufeff")
    if not csv_text.strip():
        raise InputValidationError("empty quotes file")

    try:
        frame = pd.read_csv(
            io.StringIO(csv_text),
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
        )
    except pd.errors.ParserError as e:
        raise InputValidationError(f"malformed CSV: {e}") from e

    columns = [c.strip() for c in frame.columns]
    if columns == CANONICAL_COLUMNS:
        has_tau = True
    elif columns == EXPIRY_COLUMNS:
        has_tau = False
    else:
        unknown = sorted(set(columns) - set(CANONICAL_COLUMNS) - {"expiry_date"})
        detail = f"unknown columns {unknown}" if unknown else f"got {columns}"
        raise InputValidationError(f"header must be {','.join(CANONICAL_COLUMNS)}: {detail}")
    frame.columns = columns

    if frame.empty:
        raise InputValidationError("quotes file has a header but no rows")

    quotes = [
        _parse_row(record, line_no=i + 2, has_tau=has_tau)
        for i, record in enumerate(frame.to_dict(orient="records"))
    ]

    trade_dates = {q.trade_date for q in quotes}
    if len(trade_dates) > 1:
        raise InputValidationError(f"quotes span several trade dates: {sorted(d.isoformat() for d in trade_dates)}")

    try:
        dataset = Dataset(label=label or quotes[0].trade_date.isoformat(), quotes=tuple(quotes))
    except ValidationError as e:
        raise InputValidationError(f"invalid dataset: {e.errors()[0]['msg']}") from e

    logger.debug("Quotes parsed", label=dataset.label, count=len(dataset))
    return dataset


def serialize_quotes(ds: Dataset) -> str:
    """Canonical CSV form of a dataset (always with a tau_years column)."""
    frame = pd.DataFrame(
        [
            [
                q.quote_id,
                q.trade_date.isoformat(),
                repr(q.spot),
                repr(q.strike),
                repr(q.tau),
                repr(q.rate),
                repr(q.mid_price),
            ]
            for q in ds.quotes
        ],
        columns=CANONICAL_COLUMNS,
    )
    return frame.to_csv(index=False, lineterminator="\n")


def read_quotes_file(path: Path, label: str | None = None) -> Dataset:
    """Read and parse a quotes CSV. The label defaults to `<file stem>@<trade date>`."""
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as e:
        raise InputValidationError(f"cannot read quotes file {path}: {e}") from e
    dataset = parse_quotes(text)
    if label is None:
        label = f"{Path(path).stem}@{dataset.trade_date.isoformat()}" if dataset.trade_date else Path(path).stem
    return dataset.model_copy(update={"label": label})


def write_quotes_file(ds: Dataset, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_quotes(ds), encoding="utf-8")
    return path


def split_in_out(ds: Dataset) -> tuple[Dataset, Dataset]:
    """Deterministic in/out split over the canonical order.

    Even positions (0, 2, 4, ...) form the in-sample half, odd positions the
    out-of-sample half. The halves are labelled `<label>/in` and `<label>/out`.
    """
    if len(ds) == 0:
        raise InputValidationError(f"cannot split empty dataset {ds.label!r}")
    in_sample = Dataset(label=f"{ds.label}/in", quotes=ds.quotes[0::2])
    out_sample = Dataset(label=f"{ds.label}/out", quotes=ds.quotes[1::2])
    return in_sample, out_sample
