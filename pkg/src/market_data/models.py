"""
Market Data Models
Pydantic models for European call quotes and dated quote datasets.
"""

from __future__ import annotations

import hashlib
from datetime import date
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Quote(BaseModel):
    """One observed European call quote on a non-dividend asset."""

    model_config = ConfigDict(frozen=True)

    quote_id: str = Field(..., min_length=1)
    trade_date: date
    spot: float = Field(..., gt=0, allow_inf_nan=False)
    strike: float = Field(..., gt=0, allow_inf_nan=False)
    tau: float = Field(..., gt=0, allow_inf_nan=False, description="Year fraction T - t (ACT/365)")
    rate: float = Field(..., allow_inf_nan=False, description="Continuously compounded annual rate")
    mid_price: float = Field(..., ge=0, allow_inf_nan=False)
    option_kind: Literal["call"] = "call"

    @model_validator(mode="after")
    def check_upper_bound(self) -> Quote:
        # A call on a non-dividend asset is never worth more than the asset.
        if self.mid_price > self.spot:
            raise ValueError(f"quote {self.quote_id}: mid_price {self.mid_price} exceeds spot {self.spot}")
        return self

    @property
    def sort_key(self) -> tuple[float, float, str]:
        return (self.tau, self.strike, self.quote_id)


class Dataset(BaseModel):
    """A labelled set of quotes sharing one trade date, held in canonical order."""

    model_config = ConfigDict(frozen=True)

    label: str
    quotes: tuple[Quote, ...] = ()

    @field_validator("quotes")
    @classmethod
    def canonical_order(cls, v: tuple[Quote, ...]) -> tuple[Quote, ...]:
        return tuple(sorted(v, key=lambda q: q.sort_key))

    @model_validator(mode="after")
    def check_single_trade_date(self) -> Dataset:
        dates = {q.trade_date for q in self.quotes}
        if len(dates) > 1:
            raise ValueError(f"dataset {self.label!r} mixes trade dates: {sorted(d.isoformat() for d in dates)}")
        ids = [q.quote_id for q in self.quotes]
        if len(ids) != len(set(ids)):
            raise ValueError(f"dataset {self.label!r} has duplicate quote_id values")
        return self

    def __len__(self) -> int:
        return len(self.quotes)

    @property
    def trade_date(self) -> date | None:
        return self.quotes[0].trade_date if self.quotes else None

    @property
    def quote_ids(self) -> list[str]:
        return [q.quote_id for q in self.quotes]

    def fingerprint(self) -> str:
        """SHA-256 of the canonical CSV form; identifies the exact quote set."""
        from src.market_data.loader import serialize_quotes

        return hashlib.sha256(serialize_quotes(self).encode("utf-8")).hexdigest()
