"""
MSV Pricer
Moment-based stochastic volatility: a deterministic variance term structure

    v_t = xi * (s0^2 e^{-lambda t} + s1^2 lambda t e^{-lambda t} + s2^2)

scaled by one unit-mean lognormal factor xi with standard deviation k. The
call price is the expectation of the Black-Scholes price over the
time-averaged variance rate, approximated by a Taylor expansion around its
mean using the central moments of xi up to fourth order.

msv_mixture_oracle evaluates the same expectation exactly by Gauss-Hermite
quadrature over ln xi and serves as the reference for the expansion.
"""

from __future__ import annotations

import math

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammainc

from src.errors import InputValidationError, NumericalError, QuadratureError
from src.observability.metrics import PRICE_EVALUATIONS
from src.pricing.black_scholes import bs_call_variance, bs_variance_derivative
from src.pricing.models import ModelKind, MsvMoments, MsvParams, PriceResult

logger = structlog.get_logger()

DEFAULT_ORDER = 4
SUPPORTED_ORDERS = (2, 3, 4)
SMALL_DECAY = 1e-6

HERMITE_NODES = (64, 128, 256)
MIXTURE_TOLERANCE = 1e-9  # relative to spot


def _decay_integrals(lam: float, tau: NDArray[np.float64]) -> tuple[NDArray, NDArray]:
    """(int_0^tau e^{-lam t} dt, int_0^tau lam t e^{-lam t} dt) with a series below SMALL_DECAY."""
    x = lam * tau
    small = x < SMALL_DECAY
    with np.errstate(divide="ignore", invalid="ignore"):
        a_exact = -np.expm1(-x) / lam
        b_exact = gammainc(2.0, x) / lam
    a_series = tau * (1.0 - x / 2.0 + x * x / 6.0)
    b_series = tau * (x / 2.0 - x * x / 3.0 + x * x * x / 8.0)
    return np.where(small, a_series, a_exact), np.where(small, b_series, b_exact)


def mean_variance_rate(p: MsvParams, tau: ArrayLike) -> NDArray[np.float64] | float:
    """Time-averaged deterministic variance rate over [0, tau]."""
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)) or np.any(tau <= 0):
        raise InputValidationError("tau must be positive and finite")
    a, b = _decay_integrals(p.lam, tau)
    total = p.sigma0_hat**2 * a + p.sigma1_hat**2 * b + p.sigma2_hat**2 * tau
    return (total / tau)[()]


def xi_central_moments(k: float) -> tuple[float, float, float]:
    """Central moments (orders 2, 3, 4) of a unit-mean lognormal with standard deviation k."""
    if not math.isfinite(k) or k < 0:
        raise InputValidationError(f"k must be finite and nonnegative, got {k}")
    k2 = k * k
    w = 1.0 + k2
    m3 = k2 * k2 * (3.0 + k2)
    m4 = k2 * k2 * (w**4 + 2.0 * w**3 + 3.0 * w**2 - 3.0)
    return k2, m3, m4


def msv_moments(p: MsvParams, tau: float) -> MsvMoments:
    mean = float(mean_variance_rate(p, tau))
    m2, m3, m4 = xi_central_moments(p.k)
    return MsvMoments(mean_rate=mean, mu2=m2 * mean**2, mu3=m3 * mean**3, mu4=m4 * mean**4)


def _validate_order(order: int) -> None:
    if order not in SUPPORTED_ORDERS:
        raise InputValidationError(f"expansion order must be one of {SUPPORTED_ORDERS}, got {order}")


def _expansion(
    p: MsvParams, S: ArrayLike, K: ArrayLike, r: ArrayLike, tau: ArrayLike, order: int
) -> tuple[NDArray[np.float64], NDArray[np.float64], list[NDArray[np.float64]]]:
    _validate_order(order)
    mean = np.asarray(mean_variance_rate(p, tau), dtype=float)
    base = np.asarray(bs_call_variance(S, K, r, tau, mean), dtype=float)
    if p.k == 0.0:
        return mean, base, []

    central = xi_central_moments(p.k)
    terms = []
    for i in range(2, order + 1):
        mu = central[i - 2] * mean**i
        with np.errstate(over="ignore", invalid="ignore"):
            term = np.asarray(bs_variance_derivative(S, K, r, tau, mean, i), dtype=float) * mu / math.factorial(i)
        if not np.all(np.isfinite(term)):
            logger.error("Nonfinite MSV expansion term", order=i, k=p.k, params=p.model_dump(by_alias=True))
            raise NumericalError(f"MSV expansion term of order {i} is nonfinite (k={p.k})")
        terms.append(term)
    return mean, base, terms


def msv_call(
    p: MsvParams,
    S: float,
    K: float,
    r: float,
    tau: float,
    order: int = DEFAULT_ORDER,
) -> PriceResult:
    """Taylor-expanded MSV call price.

    price = C_BS(I) + sum_{i=2}^{order} d^i C_BS/dv^i (I) * mu_i / i!

    where I is the mean variance rate and mu_i = m_i(xi) * I**i. With k = 0
    the result is exactly bs_call_variance(I).
    """
    mean, base, terms = _expansion(p, S, K, r, tau, order)
    price = float(base + sum(terms)) if terms else float(base)
    PRICE_EVALUATIONS.labels(model=ModelKind.MSV.value).inc()
    return PriceResult(
        price=price,
        model=ModelKind.MSV,
        diagnostics={
            "mean_rate": float(mean),
            "order": order,
            "bs_price": float(base),
            "terms": {str(i + 2): float(t) for i, t in enumerate(terms)},
        },
    )


def msv_prices(
    p: MsvParams,
    S: ArrayLike,
    K: ArrayLike,
    r: ArrayLike,
    tau: ArrayLike,
    order: int = DEFAULT_ORDER,
) -> NDArray[np.float64]:
    """Vectorized msv_call prices."""
    _, base, terms = _expansion(p, S, K, r, tau, order)
    price = np.atleast_1d(base + sum(terms) if terms else base)
    PRICE_EVALUATIONS.labels(model=ModelKind.MSV.value).inc(price.size)
    return price


def msv_mixture_oracle(p: MsvParams, S: float, K: float, r: float, tau: float) -> PriceResult:
    """E_xi[C_BS(xi * I)] by Gauss-Hermite quadrature over ln xi.

    ln xi ~ Normal(-s^2/2, s^2) with s^2 = ln(1 + k^2). The node count doubles
    from 64 until successive estimates agree to 1e-9 * S.
    """
    mean = float(mean_variance_rate(p, tau))
    if p.k == 0.0:
        price = float(bs_call_variance(S, K, r, tau, mean))
        return PriceResult(price=price, model=ModelKind.MSV, diagnostics={"mean_rate": mean, "nodes": 0})

    s = math.sqrt(math.log1p(p.k * p.k))
    previous: float | None = None
    for n in HERMITE_NODES:
        z, w = np.polynomial.hermite_e.hermegauss(n)
        w = w / math.sqrt(2.0 * math.pi)
        xi = np.exp(-0.5 * s * s + s * z)
        price = float(np.dot(w, bs_call_variance(S, K, r, tau, xi * mean)))
        if previous is not None and abs(price - previous) <= MIXTURE_TOLERANCE * S:
            return PriceResult(price=price, model=ModelKind.MSV, diagnostics={"mean_rate": mean, "nodes": n})
        previous = price
    raise QuadratureError(f"Gauss-Hermite mixture did not converge with {HERMITE_NODES[-1]} nodes (k={p.k})")
