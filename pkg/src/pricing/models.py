"""
Pricing Models
Parameter vectors for the three pricers and the price result they return.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ModelKind(str, Enum):
    """Supported pricing models."""

    BS = "bs"
    HESTON = "heston"
    MSV = "msv"


class BsParams(BaseModel):
    """Black-Scholes: constant annualized volatility."""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(..., gt=0, allow_inf_nan=False)


class HestonParams(BaseModel):
    """Heston stochastic volatility under the risk-neutral measure.

    `kappa` is the mean-reversion speed, `theta` the long-run variance and
    `vol_of_vol` the diffusion coefficient of the variance process.
    """

    model_config = ConfigDict(frozen=True)

    v0: float = Field(..., gt=0, allow_inf_nan=False)
    kappa: float = Field(..., gt=0, allow_inf_nan=False)
    theta: float = Field(..., gt=0, allow_inf_nan=False)
    vol_of_vol: float = Field(..., gt=0, allow_inf_nan=False)
    rho: float = Field(..., gt=-1, lt=1, allow_inf_nan=False)

    @property
    def feller_ratio(self) -> float:
        """2*kappa*theta / vol_of_vol**2; >= 1 keeps the variance strictly positive."""
        return 2.0 * self.kappa * self.theta / self.vol_of_vol**2

    @property
    def feller_satisfied(self) -> bool:
        return self.feller_ratio >= 1.0


class MsvParams(BaseModel):
    """Moment-based stochastic volatility.

    The variance rate is v_t = xi * (s0^2 e^{-lambda t} + s1^2 lambda t e^{-lambda t} + s2^2)
    with xi a unit-mean lognormal scalar of standard deviation k.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    sigma0_hat: float = Field(..., ge=0, allow_inf_nan=False)
    sigma1_hat: float = Field(..., ge=0, allow_inf_nan=False)
    sigma2_hat: float = Field(..., ge=0, allow_inf_nan=False)
    lam: float = Field(..., ge=0, allow_inf_nan=False, alias="lambda")
    k: float = Field(..., ge=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def check_variance_not_zero(self) -> MsvParams:
        if max(self.sigma0_hat, self.sigma1_hat, self.sigma2_hat) <= 0.0:
            raise ValueError("at least one of sigma0_hat, sigma1_hat, sigma2_hat must be positive")
        return self


class MsvMoments(BaseModel):
    """Mean and central moments (orders 2-4) of the time-averaged variance rate."""

    model_config = ConfigDict(frozen=True)

    mean_rate: float = Field(..., gt=0)
    mu2: float = Field(..., ge=0)
    mu3: float
    mu4: float = Field(..., ge=0)

    @model_validator(mode="after")
    def check_moment_inequality(self) -> MsvMoments:
        # Cauchy-Schwarz on central moments, with room for the last rounding bit.
        if self.mu4 < self.mu2**2 * (1.0 - 1e-12):
            raise ValueError(f"mu4 {self.mu4} below mu2**2 {self.mu2**2}")
        return self


PARAMS_BY_MODEL: dict[ModelKind, type[BaseModel]] = {
    ModelKind.BS: BsParams,
    ModelKind.HESTON: HestonParams,
    ModelKind.MSV: MsvParams,
}

ModelParams = BsParams | HestonParams | MsvParams


def params_to_dict(params: ModelParams) -> dict[str, float]:
    """Plain field mapping used in structured documents (MSV decay under `lambda`)."""
    return params.model_dump(by_alias=True)


@dataclass(frozen=True)
class PriceResult:
    """Model price with pricer diagnostics."""

    price: float
    model: ModelKind
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "price": self.price,
            "model": self.model.value,
            "diagnostics": self.diagnostics,
        }
