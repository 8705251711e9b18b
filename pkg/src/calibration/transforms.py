"""
Parameter Transforms
Maps model parameters to and from an unconstrained vector so the optimizer
can search all of R^n while every candidate stays admissible.

    positive fields      log(x)
    MSV volatility scale log(sigma_hat**2)
    Heston rho           atanh(rho)
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.errors import InputValidationError
from src.pricing.models import PARAMS_BY_MODEL, BsParams, HestonParams, ModelKind, ModelParams, MsvParams

# Clipping keeps exp/tanh finite and strictly inside the open parameter domains.
LOG_CLIP = 700.0
ATANH_CLIP = 18.0

FIELDS: dict[ModelKind, tuple[str, ...]] = {
    ModelKind.BS: ("sigma",),
    ModelKind.HESTON: ("v0", "kappa", "theta", "vol_of_vol", "rho"),
    ModelKind.MSV: ("sigma0_hat", "sigma1_hat", "sigma2_hat", "lam", "k"),
}

_SQUARED_SCALE = {"sigma0_hat", "sigma1_hat", "sigma2_hat"}


def is_log_coordinate(model: ModelKind, index: int) -> bool:
    return FIELDS[model][index] != "rho"


def transform_to_unbounded(params: ModelParams, model: ModelKind) -> NDArray[np.float64]:
    """Unconstrained coordinates of `params` in FIELDS order."""
    if not isinstance(params, PARAMS_BY_MODEL[model]):
        raise InputValidationError(f"expected {PARAMS_BY_MODEL[model].__name__}, got {type(params).__name__}")
    coords = []
    for name in FIELDS[model]:
        value = getattr(params, name)
        if name == "rho":
            coords.append(math.atanh(value))
            continue
        if value <= 0.0:
            raise InputValidationError(f"{model.value} field {name}=0 has no unconstrained coordinate")
        coords.append(math.log(value * value) if name in _SQUARED_SCALE else math.log(value))
    return np.array(coords, dtype=float)


def untransform(x: ArrayLike, model: ModelKind) -> ModelParams:
    """Admissible params for any finite coordinate vector."""
    x = np.asarray(x, dtype=float)
    names = FIELDS[model]
    if x.shape != (len(names),):
        raise InputValidationError(f"{model.value} expects {len(names)} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputValidationError("unconstrained coordinates must be finite")

    values: dict[str, float] = {}
    for name, y in zip(names, x):
        if name == "rho":
            values[name] = math.tanh(min(max(y, -ATANH_CLIP), ATANH_CLIP))
        else:
            y = min(max(y, -LOG_CLIP), LOG_CLIP)
            values[name] = math.exp(0.5 * y) if name in _SQUARED_SCALE else math.exp(y)

    if model is ModelKind.BS:
        return BsParams(**values)
    if model is ModelKind.HESTON:
        return HestonParams(**values)
    return MsvParams(**values)
