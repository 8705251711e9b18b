"""
Pricing Engine
Dispatches quotes to the Black-Scholes, Heston and MSV pricers and loads
parameter documents.
"""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import structlog
import yaml
from numpy.typing import NDArray
from pydantic import ValidationError

from src.errors import InputValidationError, NumericalError
from src.market_data.models import Dataset, Quote
from src.pricing.black_scholes import bs_call
from src.pricing.heston import heston_call, heston_prices
from src.pricing.models import (
    PARAMS_BY_MODEL,
    BsParams,
    HestonParams,
    ModelKind,
    ModelParams,
    MsvParams,
    PriceResult,
)
from src.pricing.msv import DEFAULT_ORDER, msv_call, msv_prices

logger = structlog.get_logger()


def quote_arrays(ds: Dataset) -> tuple[NDArray[np.float64], ...]:
    """(spot, strike, rate, tau, mid_price) columns in canonical order."""
    columns = np.array([[q.spot, q.strike, q.rate, q.tau, q.mid_price] for q in ds.quotes], dtype=float)
    if columns.size == 0:
        raise InputValidationError(f"dataset {ds.label!r} is empty")
    return tuple(columns.T)


def price_arrays(
    model: ModelKind,
    params: ModelParams,
    S: NDArray[np.float64],
    K: NDArray[np.float64],
    r: NDArray[np.float64],
    tau: NDArray[np.float64],
    order: int = DEFAULT_ORDER,
) -> NDArray[np.float64]:
    """Vectorized model prices for quote columns."""
    if model is ModelKind.BS:
        assert isinstance(params, BsParams)
        return np.atleast_1d(np.asarray(bs_call(S, K, r, tau, params.sigma), dtype=float))
    if model is ModelKind.HESTON:
        assert isinstance(params, HestonParams)
        return heston_prices(params, S, K, r, tau)
    assert isinstance(params, MsvParams)
    return msv_prices(params, S, K, r, tau, order=order)


def price_quote(model: ModelKind, params: ModelParams, quote: Quote, order: int = DEFAULT_ORDER) -> PriceResult:
    """Price one quote; pricing failures name the quote."""
    try:
        if model is ModelKind.BS:
            assert isinstance(params, BsParams)
            price = float(bs_call(quote.spot, quote.strike, quote.rate, quote.tau, params.sigma))
            return PriceResult(price=price, model=ModelKind.BS)
        if model is ModelKind.HESTON:
            assert isinstance(params, HestonParams)
            return heston_call(params, quote.spot, quote.strike, quote.rate, quote.tau)
        assert isinstance(params, MsvParams)
        return msv_call(params, quote.spot, quote.strike, quote.rate, quote.tau, order=order)
    except NumericalError as e:
        raise type(e)(f"quote {quote.quote_id}: {e}") from e


def price_dataset(
    model: ModelKind,
    params: ModelParams,
    ds: Dataset,
    order: int = DEFAULT_ORDER,
) -> NDArray[np.float64]:
    """Model prices for every quote of `ds`, in canonical order."""
    S, K, r, tau, _ = quote_arrays(ds)
    try:
        return price_arrays(model, params, S, K, r, tau, order=order)
    except NumericalError:
        # Re-price quote by quote so the error names the culprit.
        for quote in ds.quotes:
            price_quote(model, params, quote, order=order)
        raise


def intrinsic_bounds(quote: Quote) -> tuple[float, float]:
    """No-arbitrage call bounds (max(S - K e^{-r tau}, 0), S)."""
    lower = max(quote.spot - quote.strike * float(np.exp(-quote.rate * quote.tau)), 0.0)
    return lower, quote.spot


# ─── Parameter Documents ──────────────────────────────────────

def parse_params(model: ModelKind, data: Mapping[str, Any]) -> ModelParams:
    """Build model params from a mapping.

    Accepts either a bare field mapping or a calibration document that holds
    the fields under `params` (its `model` entry must then match).
    """
    if "params" in data and isinstance(data["params"], Mapping):
        declared = data.get("model")
        if declared is not None and declared != model.value:
            raise InputValidationError(f"params document is for model {declared!r}, not {model.value!r}")
        data = data["params"]
    try:
        return PARAMS_BY_MODEL[model].model_validate(dict(data))  # type: ignore[return-value]
    except ValidationError as e:
        reasons = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or model.value}: {err['msg']}" for err in e.errors()
        )
        raise InputValidationError(f"invalid {model.value} params ({reasons})") from e


def load_params(path: Path, model: ModelKind) -> ModelParams:
    """Read a JSON or YAML params document."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as e:
        raise InputValidationError(f"cannot read params file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise InputValidationError(f"params file {path} is not valid JSON/YAML: {e}") from e
    if not isinstance(data, Mapping):
        raise InputValidationError(f"params file {path} must hold a mapping")
    params = parse_params(model, data)
    logger.debug("Params loaded", path=str(path), model=model.value)
    return params
