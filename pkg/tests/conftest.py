"""Shared fixtures."""

from __future__ import annotations

from datetime import date

import pytest
import structlog

from src.market_data.models import Dataset, Quote
from src.pricing.models import BsParams, HestonParams, ModelKind, MsvParams
from src.scripts.quote_generator import generate_quotes


@pytest.fixture(autouse=True)
def reset_logging():
    """CLI runs bind structlog to a captured stream; restore defaults afterwards."""
    yield
    structlog.reset_defaults()


@pytest.fixture
def bs_params() -> BsParams:
    return BsParams(sigma=0.2)


@pytest.fixture
def heston_params() -> HestonParams:
    return HestonParams(v0=0.05, kappa=2.0, theta=0.05, vol_of_vol=0.4, rho=-0.6)


@pytest.fixture
def msv_params() -> MsvParams:
    return MsvParams(sigma0_hat=0.15, sigma1_hat=0.1, sigma2_hat=0.15, lam=2.0, k=0.2)


@pytest.fixture
def bs_dataset(bs_params) -> Dataset:
    return generate_quotes(ModelKind.BS, bs_params, n_maturities=4, n_strikes=5, label="flat")


@pytest.fixture
def heston_dataset(heston_params) -> Dataset:
    return generate_quotes(ModelKind.HESTON, heston_params, n_maturities=4, n_strikes=5, label="smile")


def make_quote(quote_id: str = "q1", **overrides) -> Quote:
    fields = {
        "quote_id": quote_id,
        "trade_date": date(2017, 3, 7),
        "spot": 100.0,
        "strike": 100.0,
        "tau": 0.5,
        "rate": 0.01,
        "mid_price": 6.0,
    }
    fields.update(overrides)
    return Quote(**fields)
