"""
Black-Scholes Pricer
Closed-form European call on a non-dividend asset, parameterized either by
volatility or by variance rate, plus analytic derivatives of the price with
respect to the variance rate up to fourth order.

All functions broadcast over numpy arrays and return a float for scalar input.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr

from src.errors import InputValidationError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
MAX_DERIVATIVE_ORDER = 4


def norm_cdf(x: ArrayLike) -> NDArray[np.float64] | float:
    """Standard normal CDF (scipy's ndtr, accurate to a few ulps over the real line)."""
    return ndtr(np.asarray(x, dtype=float))[()]


def norm_pdf(x: ArrayLike) -> NDArray[np.float64] | float:
    x = np.asarray(x, dtype=float)
    return (_INV_SQRT_2PI * np.exp(-0.5 * x * x))[()]


def _validated(S: ArrayLike, K: ArrayLike, r: ArrayLike, tau: ArrayLike, last: ArrayLike, last_name: str) -> tuple:
    arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (S, K, r, tau, last)))
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise InputValidationError("Black-Scholes inputs must be finite")
    S_, K_, _, tau_, last_ = arrays
    if np.any(S_ <= 0) or np.any(K_ <= 0):
        raise InputValidationError("spot and strike must be positive")
    if np.any(tau_ <= 0):
        raise InputValidationError("tau must be positive")
    if np.any(last_ < 0):
        raise InputValidationError(f"{last_name} must be nonnegative")
    return tuple(arrays)


def _call_from_total_variance(
    S: NDArray[np.float64],
    K: NDArray[np.float64],
    r: NDArray[np.float64],
    tau: NDArray[np.float64],
    w: NDArray[np.float64],
) -> NDArray[np.float64]:
    discounted_strike = K * np.exp(-r * tau)
    lower = np.maximum(S - discounted_strike, 0.0)
    sqrt_w = np.sqrt(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(S / K) + r * tau + 0.5 * w) / sqrt_w
        d2 = d1 - sqrt_w
        price = S * ndtr(d1) - discounted_strike * ndtr(d2)
    # Zero total variance is the deterministic payoff limit.
    price = np.where(sqrt_w > 0.0, price, lower)
    return np.clip(price, lower, S)


def bs_call(S: ArrayLike, K: ArrayLike, r: ArrayLike, tau: ArrayLike, sigma: ArrayLike) -> NDArray[np.float64] | float:
    """Black-Scholes call price S*N(d1) - K*exp(-r*tau)*N(d2).

    sigma = 0 returns the limit max(S - K*exp(-r*tau), 0).
    """
    S_, K_, r_, tau_, sigma_ = _validated(S, K, r, tau, sigma, "sigma")
    return _call_from_total_variance(S_, K_, r_, tau_, sigma_ * sigma_ * tau_)[()]


def bs_call_variance(
    S: ArrayLike, K: ArrayLike, r: ArrayLike, tau: ArrayLike, v: ArrayLike
) -> NDArray[np.float64] | float:
    """Black-Scholes call price evaluated at variance rate v (= sigma**2)."""
    S_, K_, r_, tau_, v_ = _validated(S, K, r, tau, v, "variance rate")
    return _call_from_total_variance(S_, K_, r_, tau_, v_ * tau_)[()]


def bs_variance_derivative(
    S: ArrayLike,
    K: ArrayLike,
    r: ArrayLike,
    tau: ArrayLike,
    v: ArrayLike,
    order: int,
) -> NDArray[np.float64] | float:
    """i-th derivative of the call price with respect to the variance rate.

    With total variance w = v*tau and forward log-moneyness x = ln(S/K) + r*tau,

        dC/dw = S*phi(d1) / (2*sqrt(w)) = c * h(w),
        h(w)  = w**-0.5 * exp(-x**2/(2w) - w/8),   c = S*exp(-x/2) / (2*sqrt(2*pi)).

    Writing L(w) = d ln h / dw = -1/(2w) + x**2/(2w**2) - 1/8 gives

        d2C/dw2 = c*h*L
        d3C/dw3 = c*h*(L**2 + L')
        d4C/dw4 = c*h*(L**3 + 3*L*L' + L'')

    with L' = 1/(2w**2) - x**2/w**3 and L'' = -1/w**3 + 3*x**2/w**4. Each
    derivative in v picks up one factor of tau.
    """
    if order not in range(1, MAX_DERIVATIVE_ORDER + 1):
        raise InputValidationError(f"derivative order must be in 1..{MAX_DERIVATIVE_ORDER}, got {order}")
    S_, K_, r_, tau_, v_ = _validated(S, K, r, tau, v, "variance rate")
    if np.any(v_ <= 0):
        raise InputValidationError("variance rate must be positive for derivatives")

    w = v_ * tau_
    x = np.log(S_ / K_) + r_ * tau_
    base = S_ * _INV_SQRT_2PI * 0.5 * np.exp(-0.5 * x - 0.5 * np.log(w) - x * x / (2.0 * w) - w / 8.0)

    if order == 1:
        poly = np.ones_like(w)
    else:
        L1 = -0.5 / w + x * x / (2.0 * w * w) - 0.125
        if order == 2:
            poly = L1
        else:
            L1p = 0.5 / (w * w) - x * x / (w * w * w)
            if order == 3:
                poly = L1 * L1 + L1p
            else:
                L1pp = -1.0 / (w * w * w) + 3.0 * x * x / (w * w * w * w)
                poly = L1 * L1 * L1 + 3.0 * L1 * L1p + L1pp

    with np.errstate(invalid="ignore", over="ignore"):
        result = np.where(base > 0.0, tau_**order * base * poly, 0.0)
    return result[()]
