"""
Heston Pricer
Semi-analytic European call under Heston stochastic volatility, priced from
the two pseudo-probabilities P1 and P2 obtained by Fourier inversion of the
characteristic function.

The characteristic function uses the rearranged ("little trap") form in which
every exponential decays and the complex logarithm stays on its principal
branch for all maturities. Inversion runs Gauss-Legendre on [EPS, phi_max]
with phi_max chosen from the tail of |f_j| and the node count doubled until
prices self-converge.

Dynamics are risk-neutral: drift r, no volatility risk premium.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray

from src.errors import InputValidationError, NumericalError, QuadratureError
from src.observability.metrics import PRICE_EVALUATIONS, QUADRATURE_NODES
from src.pricing.models import HestonParams, ModelKind, PriceResult

logger = structlog.get_logger()

# ─── Quadrature Settings ──────────────────────────────────────

EPS = 1e-8
PHI_MAX_START = 200.0
PHI_MAX_FLOOR = 25.0
PHI_MAX_CAP = 12800.0
TAIL_TOLERANCE = 1e-12
MIN_NODES = 64
MAX_NODES = 1024
CONVERGENCE_TOLERANCE = 1e-9  # relative to spot
PROBABILITY_SLACK = 1e-8

_LOG1P_SERIES_CUTOFF = 1e-4


@lru_cache(maxsize=None)
def _legendre_nodes(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Legendre nodes and weights on [-1, 1], shared read-only."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _nodes_on(n: int, phi_max: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    x, w = _legendre_nodes(n)
    half = 0.5 * (phi_max - EPS)
    return EPS + half * (x + 1.0), half * w


def _complex_log1p(x: NDArray[np.complex128]) -> NDArray[np.complex128]:
    # numpy's complex log1p forms 1 + x first and loses the small part.
    small = np.abs(x) < _LOG1P_SERIES_CUTOFF
    series = x * (1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x)))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log(1.0 + x)
    return np.where(small, series, direct)


# ─── Characteristic Function ──────────────────────────────────

def heston_cf(
    phi: ArrayLike,
    p: HestonParams,
    S: ArrayLike,
    r: ArrayLike,
    tau: ArrayLike,
    j: int,
) -> NDArray[np.complex128] | complex:
    """f_j(phi) = exp(C_j + D_j*v0 + i*phi*ln S).

    With beta = b_j - rho*sigma*i*phi, q = 2*u_j*i*phi - phi**2 and
    d = sqrt(beta**2 - sigma**2*q) (principal root, Re d >= 0):

        g = (beta - d)/(beta + d) = sigma**2*q/(beta + d)**2
        D = q/(beta + d) * (1 - e^{-d tau}) / (1 - g e^{-d tau})
        C = r*i*phi*tau + a*q*tau/(beta + d) - (2a/sigma**2) * log1p(g(1 - e^{-d tau})/(1 - g))

    where u_1 = 1/2, b_1 = kappa - rho*sigma, u_2 = -1/2, b_2 = kappa and
    a = kappa*theta. Writing beta - d as sigma**2*q/(beta + d) keeps the
    vol_of_vol -> 0 limit free of cancellation.

    Raises:
        InputValidationError: j not in {1, 2} or tau <= 0.
        NumericalError: any nonfinite value.
    """
    if j not in (1, 2):
        raise InputValidationError(f"j must be 1 or 2, got {j}")
    phi = np.asarray(phi, dtype=float)
    S = np.asarray(S, dtype=float)
    r = np.asarray(r, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise InputValidationError("tau must be positive")

    sigma = p.vol_of_vol
    sigma2 = sigma * sigma
    a = p.kappa * p.theta
    u = 0.5 if j == 1 else -0.5
    b = p.kappa - p.rho * sigma if j == 1 else p.kappa

    iphi = 1j * phi
    beta = b - p.rho * sigma * iphi
    q = 2.0 * u * iphi - phi * phi
    d = np.sqrt(beta * beta - sigma2 * q)
    beta_plus_d = beta + d
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = sigma2 * q / (beta_plus_d * beta_plus_d)
        one_minus_exp = -np.expm1(-d * tau)
        exp_neg = 1.0 - one_minus_exp
        D = q / beta_plus_d * one_minus_exp / (1.0 - g * exp_neg)
        log_term = _complex_log1p(g * one_minus_exp / (1.0 - g))
        C = r * iphi * tau + a * q * tau / beta_plus_d - (2.0 * a / sigma2) * log_term
        f = np.exp(C + D * p.v0 + iphi * np.log(S))

    if not np.all(np.isfinite(f)):
        logger.error("Nonfinite Heston characteristic function", params=p.model_dump(), j=j)
        raise NumericalError(f"nonfinite Heston characteristic function for {p.model_dump()}")
    return f[()]


# ─── Inversion ────────────────────────────────────────────────

def _tail(p: HestonParams, S: NDArray, r: NDArray, tau: NDArray, phi_max: float) -> float:
    return max(float(np.max(np.abs(heston_cf(phi_max, p, S, r, tau, j)))) / phi_max for j in (1, 2))


def _choose_phi_max(p: HestonParams, S: NDArray, r: NDArray, tau: NDArray) -> float:
    phi_max = PHI_MAX_START
    if _tail(p, S, r, tau, phi_max) <= TAIL_TOLERANCE:
        while phi_max / 2.0 >= PHI_MAX_FLOOR and _tail(p, S, r, tau, phi_max / 2.0) <= TAIL_TOLERANCE:
            phi_max /= 2.0
        return phi_max
    while _tail(p, S, r, tau, phi_max) > TAIL_TOLERANCE:
        if phi_max >= PHI_MAX_CAP:
            raise QuadratureError(
                f"Heston integrand tail above {TAIL_TOLERANCE} at phi={phi_max} for {p.model_dump()}"
            )
        phi_max *= 2.0
    logger.warning("Heston truncation extended", phi_max=phi_max, min_tau=float(np.min(tau)))
    return phi_max


def _raw_probabilities(
    p: HestonParams,
    S: NDArray,
    K: NDArray,
    r: NDArray,
    tau: NDArray,
    n: int,
    phi_max: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    phi, w = _nodes_on(n, phi_max)
    # quotes on axis 0, nodes on axis 1
    S_, K_, r_, tau_ = (a[:, None] for a in (S, K, r, tau))
    kernel = np.exp(-1j * phi * np.log(K_)) / (1j * phi)
    probs = []
    for j in (1, 2):
        f = heston_cf(phi, p, S_, r_, tau_, j)
        probs.append(0.5 + (np.real(kernel * f) @ w) / np.pi)
    return probs[0], probs[1]


def _price_from_probabilities(
    S: NDArray, K: NDArray, r: NDArray, tau: NDArray, p1: NDArray, p2: NDArray
) -> NDArray[np.float64]:
    discounted_strike = K * np.exp(-r * tau)
    price = S * np.clip(p1, 0.0, 1.0) - discounted_strike * np.clip(p2, 0.0, 1.0)
    return np.clip(price, np.maximum(S - discounted_strike, 0.0), S)


def _validate_quotes(S: ArrayLike, K: ArrayLike, r: ArrayLike, tau: ArrayLike) -> tuple[NDArray, ...]:
    arrays = np.broadcast_arrays(*(np.atleast_1d(np.asarray(a, dtype=float)) for a in (S, K, r, tau)))
    arrays = tuple(a.ravel() for a in arrays)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise InputValidationError("Heston inputs must be finite")
    S_, K_, _, tau_ = arrays
    if np.any(S_ <= 0) or np.any(K_ <= 0) or np.any(tau_ <= 0):
        raise InputValidationError("spot, strike and tau must be positive")
    return arrays


def _solve(
    p: HestonParams, S: NDArray, K: NDArray, r: NDArray, tau: NDArray
) -> tuple[NDArray, NDArray, NDArray, int, float]:
    phi_max = _choose_phi_max(p, S, r, tau)
    n = MIN_NODES
    p1, p2 = _raw_probabilities(p, S, K, r, tau, n, phi_max)
    price = _price_from_probabilities(S, K, r, tau, p1, p2)
    while True:
        if n >= MAX_NODES:
            raise QuadratureError(f"Heston quadrature did not converge with {MAX_NODES} nodes for {p.model_dump()}")
        n *= 2
        p1_next, p2_next = _raw_probabilities(p, S, K, r, tau, n, phi_max)
        price_next = _price_from_probabilities(S, K, r, tau, p1_next, p2_next)
        converged = np.all(np.abs(price_next - price) <= CONVERGENCE_TOLERANCE * S)
        p1, p2, price = p1_next, p2_next, price_next
        if converged:
            break
    QUADRATURE_NODES.observe(n)
    return p1, p2, price, n, phi_max


def _excursions(p1: NDArray, p2: NDArray) -> list[dict[str, float | int]]:
    found = []
    for j, pj in ((1, p1), (2, p2)):
        outside = (pj < -PROBABILITY_SLACK) | (pj > 1.0 + PROBABILITY_SLACK)
        for idx in np.flatnonzero(outside):
            found.append({"index": int(idx), "j": j, "raw": float(pj[idx])})
    if found:
        logger.warning("Heston probability outside [0, 1] clamped", excursions=found)
    return found


def heston_pj(
    p: HestonParams,
    S: float,
    K: float,
    r: float,
    tau: float,
    j: int,
) -> float:
    """Pseudo-probability P_j = 1/2 + (1/pi) * int_0^inf Re[e^{-i phi ln K} f_j / (i phi)] dphi.

    The returned value is clamped to [0, 1]; excursions beyond the 1e-8
    window are logged.
    """
    if j not in (1, 2):
        raise InputValidationError(f"j must be 1 or 2, got {j}")
    S_, K_, r_, tau_ = _validate_quotes(S, K, r, tau)
    p1, p2, _, _, _ = _solve(p, S_, K_, r_, tau_)
    _excursions(p1, p2)
    raw = p1[0] if j == 1 else p2[0]
    return float(np.clip(raw, 0.0, 1.0))


def heston_call(p: HestonParams, S: float, K: float, r: float, tau: float) -> PriceResult:
    """Heston call price S*P1 - K*exp(-r*tau)*P2 with quadrature diagnostics."""
    S_, K_, r_, tau_ = _validate_quotes(S, K, r, tau)
    p1, p2, price, n, phi_max = _solve(p, S_, K_, r_, tau_)
    PRICE_EVALUATIONS.labels(model=ModelKind.HESTON.value).inc()
    return PriceResult(
        price=float(price[0]),
        model=ModelKind.HESTON,
        diagnostics={
            "p1": float(p1[0]),
            "p2": float(p2[0]),
            "nodes": n,
            "phi_max": phi_max,
            "feller_ratio": p.feller_ratio,
            "clamped": _excursions(p1, p2),
        },
    )


def heston_prices(
    p: HestonParams,
    S: ArrayLike,
    K: ArrayLike,
    r: ArrayLike,
    tau: ArrayLike,
) -> NDArray[np.float64]:
    """Vectorized Heston prices for many quotes sharing one parameter vector.

    All quotes share the truncation point and node count, so this is the
    form the calibrator calls once per objective evaluation.
    """
    S_, K_, r_, tau_ = _validate_quotes(S, K, r, tau)
    p1, p2, price, _, _ = _solve(p, S_, K_, r_, tau_)
    _excursions(p1, p2)
    PRICE_EVALUATIONS.labels(model=ModelKind.HESTON.value).inc(len(price))
    return price
