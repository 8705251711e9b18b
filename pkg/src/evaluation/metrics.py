"""
Error Metrics
Price-space error measures used in evaluation reports.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.errors import InputValidationError


def _pair(model_prices: ArrayLike, market_prices: ArrayLike) -> tuple[NDArray, NDArray]:
    model = np.asarray(model_prices, dtype=float).ravel()
    market = np.asarray(market_prices, dtype=float).ravel()
    if model.size != market.size:
        raise InputValidationError(f"length mismatch: {model.size} model prices vs {market.size} market prices")
    if model.size == 0:
        raise InputValidationError("no prices to compare")
    if not (np.all(np.isfinite(model)) and np.all(np.isfinite(market))):
        raise InputValidationError("prices must be finite")
    return model, market


def relative_error(model_price: float, market_price: float) -> float:
    """|model - market| / market."""
    if market_price <= 0:
        raise InputValidationError(f"market price must be positive, got {market_price}")
    return abs(model_price - market_price) / market_price


def mrae(model_prices: ArrayLike, market_prices: ArrayLike) -> float:
    """Mean relative absolute error (1/n) * sum |model - market| / market, as a fraction."""
    model, market = _pair(model_prices, market_prices)
    if np.any(market <= 0):
        raise InputValidationError("MRAE needs strictly positive market prices")
    return float(np.mean(np.abs(model - market) / market))


def rmse(model_prices: ArrayLike, market_prices: ArrayLike) -> float:
    model, market = _pair(model_prices, market_prices)
    return float(np.sqrt(np.mean((model - market) ** 2)))


def compare_dummy(bs_err: float, sv_err: float) -> int:
    """0 when the stochastic-volatility error is no worse than Black-Scholes, else 1."""
    return 0 if sv_err <= bs_err else 1
