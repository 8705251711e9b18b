"""
Report Charts
Static SVG charts for evaluation documents: model-versus-market price
scatter and per-model MRAE bars. The data each chart plots is embedded as
JSON in the SVG description metadata, and output is deterministic (no
timestamp, fixed id salt).
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import structlog
from matplotlib import rc_context
from matplotlib.figure import Figure

from src.errors import InputValidationError
from src.evaluation.report import MODELS, EvaluationDocument

logger = structlog.get_logger()

SVG_RC = {"svg.hashsalt": "volcal", "svg.fonttype": "path"}
MARKERS = {"bs": "o", "heston": "s", "msv": "^"}


def slugify(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_") or "dataset"


def price_chart_data(doc: EvaluationDocument) -> dict[str, Any]:
    return {
        "dataset": doc.report.dataset_label,
        "kind": "prices",
        "rows": [row.model_dump(mode="json") for row in doc.prices],
    }


def error_chart_data(doc: EvaluationDocument) -> dict[str, Any]:
    return {
        "dataset": doc.report.dataset_label,
        "kind": "errors",
        "rows": [
            {
                "model": e.model.value,
                "mrae_in": e.mrae_in,
                "mrae_out": e.mrae_out,
                "rmse_in": e.rmse_in,
                "rmse_out": e.rmse_out,
            }
            for e in doc.report.models
        ],
    }


def _save(fig: Figure, path: Path, data: dict[str, Any]) -> Path:
    metadata = {"Date": None, "Description": json.dumps(data, sort_keys=True)}
    with rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata=metadata)
    return path


def _price_figure(doc: EvaluationDocument) -> Figure:
    fig = Figure(figsize=(6.0, 6.0))
    ax = fig.add_subplot()
    market = [row.market for row in doc.prices]
    for model in MODELS:
        prices = [getattr(row, model.value) for row in doc.prices]
        ax.scatter(market, prices, s=14, marker=MARKERS[model.value], label=model.value)
    if market:
        lo, hi = min(market), max(market)
        ax.plot([lo, hi], [lo, hi], color="grey", linewidth=0.8)
    ax.set_xlabel("market price")
    ax.set_ylabel("model price")
    ax.set_title(doc.report.dataset_label)
    ax.legend()
    return fig


def _error_figure(doc: EvaluationDocument) -> Figure:
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot()
    positions = range(len(MODELS))
    errors = [doc.report.for_model(m) for m in MODELS]
    ax.bar([p - 0.2 for p in positions], [e.mrae_in_pct for e in errors], width=0.4, label="in-sample")
    ax.bar(
        [p + 0.2 for p in positions],
        [e.mrae_out_pct or 0.0 for e in errors],
        width=0.4,
        label="out-of-sample",
    )
    ax.set_xticks(list(positions), [m.value for m in MODELS])
    ax.set_ylabel("MRAE (%)")
    ax.set_title(doc.report.dataset_label)
    ax.legend()
    return fig


def write_charts(docs: Sequence[EvaluationDocument], output_dir: Path) -> list[Path]:
    """Write `<slug>_prices.svg` and `<slug>_errors.svg` per document."""
    if not docs:
        logger.warning("No evaluation documents to chart")
        return []
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for doc in docs:
        slug = slugify(doc.report.dataset_label)
        written.append(_save(_price_figure(doc), output_dir / f"{slug}_prices.svg", price_chart_data(doc)))
        written.append(_save(_error_figure(doc), output_dir / f"{slug}_errors.svg", error_chart_data(doc)))
        logger.info("Charts written", dataset=doc.report.dataset_label, slug=slug)
    return written


def read_chart_data(path: Path) -> dict[str, Any]:
    """Chart data embedded in an SVG written by write_charts."""
    root = ET.parse(path).getroot()
    node = root.find(".//{http://purl.org/dc/elements/1.1/}description")
    if node is None or node.text is None:
        raise InputValidationError(f"{path} carries no chart data")
    return json.loads(node.text)
