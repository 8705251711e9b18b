"""
Synthetic Quote Generator
Prices a maturity x strike grid with any of the three models and writes it
as a canonical quotes CSV, optionally with seeded multiplicative noise.
"""

from __future__ import annotations

from datetime import date
from pathlib import Path

import click
import numpy as np

from src.market_data.loader import write_quotes_file
from src.market_data.models import Dataset, Quote
from src.pricing.engine import load_params, price_arrays
from src.pricing.models import ModelKind, ModelParams
from src.pricing.msv import DEFAULT_ORDER
from src.streams import substream

NOISE_DOMAIN = 2
DEFAULT_TRADE_DATE = date(2017, 3, 7)
MIN_DAYS, MAX_DAYS = 30, 365
MIN_MONEYNESS, MAX_MONEYNESS = 0.8, 1.2


def quote_grid(
    spot: float,
    n_maturities: int = 10,
    n_strikes: int = 10,
) -> tuple[np.ndarray, np.ndarray]:
    """(tau, strike) columns of the grid, maturities 30 days to 1 year, strikes 0.8S to 1.2S."""
    days = np.rint(np.linspace(MIN_DAYS, MAX_DAYS, n_maturities))
    strikes = np.round(np.linspace(MIN_MONEYNESS * spot, MAX_MONEYNESS * spot, n_strikes), 6)
    tau, strike = np.meshgrid(days / 365.0, strikes, indexing="ij")
    return tau.ravel(), strike.ravel()


def generate_quotes(
    model: ModelKind,
    params: ModelParams,
    spot: float = 100.0,
    rate: float = 0.01,
    trade_date: date = DEFAULT_TRADE_DATE,
    n_maturities: int = 10,
    n_strikes: int = 10,
    noise: float = 0.0,
    seed: int = 0,
    label: str | None = None,
    order: int = DEFAULT_ORDER,
) -> Dataset:
    """Quotes whose mid prices are model prices, times (1 + noise * Z) when noise > 0."""
    tau, strike = quote_grid(spot, n_maturities, n_strikes)
    S = np.full_like(tau, spot)
    r = np.full_like(tau, rate)
    prices = price_arrays(model, params, S, strike, r, tau, order=order)
    if noise > 0:
        z = substream(seed, 0, domain=NOISE_DOMAIN).standard_normal(prices.size)
        prices = prices * (1.0 + noise * z)
    prices = np.clip(prices, 0.0, spot)

    quotes = tuple(
        Quote(
            quote_id=f"q{i:03d}",
            trade_date=trade_date,
            spot=spot,
            strike=float(strike[i]),
            tau=float(tau[i]),
            rate=rate,
            mid_price=float(prices[i]),
        )
        for i in range(prices.size)
    )
    return Dataset(label=label or f"synthetic-{model.value}@{trade_date.isoformat()}", quotes=quotes)


@click.command()
@click.option("--model", "model_name", required=True, type=click.Choice([m.value for m in ModelKind]))
@click.option("--params", "params_file", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--output", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Quotes CSV to write")
@click.option("--spot", default=100.0, show_default=True)
@click.option("--rate", default=0.01, show_default=True)
@click.option("--trade-date", default=DEFAULT_TRADE_DATE.isoformat(), show_default=True)
@click.option("--maturities", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--strikes", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--noise", default=0.0, show_default=True, type=click.FloatRange(min=0.0))
@click.option("--seed", default=None, type=click.IntRange(min=0), help="Noise seed (defaults to the global seed)")
@click.pass_context
def main(
    ctx: click.Context,
    model_name: str,
    params_file: Path,
    output: Path,
    spot: float,
    rate: float,
    trade_date: str,
    maturities: int,
    strikes: int,
    noise: float,
    seed: int | None,
) -> None:
    """Generate a synthetic quotes file from model parameters."""
    model = ModelKind(model_name)
    try:
        trade = date.fromisoformat(trade_date)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--trade-date") from e
    if seed is None:
        seed = ctx.obj.seed if ctx.obj is not None else 0
    ds = generate_quotes(
        model,
        load_params(params_file, model),
        spot=spot,
        rate=rate,
        trade_date=trade,
        n_maturities=maturities,
        n_strikes=strikes,
        noise=noise,
        seed=seed,
    )
    write_quotes_file(ds, output)
    click.echo(f"Generated {len(ds)} quotes -> {output}")


if __name__ == "__main__":
    main()
