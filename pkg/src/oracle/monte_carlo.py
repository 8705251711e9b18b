"""
Monte-Carlo Oracle
Reference prices for the Heston quadrature pricer (full-truncation Euler on
log-spot and variance) and for Black-Scholes (exact lognormal draw).

Paths are simulated in fixed-size blocks. Block b always draws from the
Philox substream (seed, b), and block outputs are concatenated in block order
before any reduction, so estimates are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import InputValidationError
from src.observability.metrics import MC_PATHS
from src.pricing.models import HestonParams, ModelKind
from src.streams import SEED_MAX, substream

logger = structlog.get_logger()

DEFAULT_SEED = 20170307


class McConfig(BaseModel):
    """Simulation budget and random-stream selection."""

    model_config = ConfigDict(frozen=True)

    n_paths: int = Field(default=200_000, ge=2)
    n_steps: int = Field(default=250, ge=1, description="Time steps per unit of tau")
    seed: int = Field(default=DEFAULT_SEED, ge=0, le=SEED_MAX)
    antithetic: bool = True
    block_size: int = Field(default=4096, ge=2)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_pairs(self) -> McConfig:
        if self.antithetic and self.n_paths % 2:
            raise ValueError(f"n_paths must be even with antithetic sampling, got {self.n_paths}")
        if self.block_size % 2:
            raise ValueError(f"block_size must be even, got {self.block_size}")
        return self

    def blocks(self) -> list[int]:
        """Path count of each block, in block order."""
        full, rest = divmod(self.n_paths, self.block_size)
        return [self.block_size] * full + ([rest] if rest else [])


class McEstimate(BaseModel):
    """Discounted payoff mean with its standard error."""

    model_config = ConfigDict(frozen=True)

    price: float
    stderr: float = Field(..., ge=0)
    n_effective: int = Field(..., ge=1)

    def within(self, reference: float, n_stderr: float = 3.0) -> bool:
        return abs(self.price - reference) <= n_stderr * self.stderr


def _normals(rng: np.random.Generator, shape: tuple[int, ...], n_paths: int, antithetic: bool) -> NDArray:
    """Normals for `n_paths` paths along the last axis; antithetic halves mirror the first half."""
    if not antithetic:
        return rng.standard_normal(shape + (n_paths,))
    half = rng.standard_normal(shape + (n_paths // 2,))
    return np.concatenate([half, -half], axis=-1)


def _simulate(cfg: McConfig, block_fn: Callable[[int, int], NDArray[np.float64]]) -> NDArray[np.float64]:
    sizes = cfg.blocks()
    if cfg.workers == 1:
        parts = [block_fn(b, m) for b, m in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(block_fn, range(len(sizes)), sizes))
    return np.concatenate(parts)


def _estimate(discounted: NDArray[np.float64], cfg: McConfig) -> McEstimate:
    """Reduce path payoffs; block layout is [first halves..., mirrored halves...] per block."""
    if cfg.antithetic:
        pairs = []
        offset = 0
        for m in cfg.blocks():
            block = discounted[offset : offset + m]
            pairs.append(0.5 * (block[: m // 2] + block[m // 2 :]))
            offset += m
        samples = np.concatenate(pairs)
    else:
        samples = discounted
    n = samples.size
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(price=float(np.mean(samples)), stderr=stderr, n_effective=n)


def _check_contract(S: float, strikes: NDArray, tau: float) -> None:
    if not (math.isfinite(S) and S > 0 and math.isfinite(tau) and tau > 0):
        raise InputValidationError("spot and tau must be positive and finite")
    if strikes.size == 0 or not np.all(np.isfinite(strikes)) or np.any(strikes <= 0):
        raise InputValidationError("strikes must be positive and finite")


# ─── Heston ───────────────────────────────────────────────────

def _heston_terminal(p: HestonParams, S: float, r: float, tau: float, cfg: McConfig) -> NDArray[np.float64]:
    steps = max(1, math.ceil(cfg.n_steps * tau))
    dt = tau / steps
    sigma = p.vol_of_vol
    rho_bar = math.sqrt(1.0 - p.rho * p.rho)

    def block(index: int, m: int) -> NDArray[np.float64]:
        rng = substream(cfg.seed, index)
        log_s = np.full(m, math.log(S))
        v = np.full(m, p.v0)
        for _ in range(steps):
            z = _normals(rng, (2,), m, cfg.antithetic)
            v_pos = np.maximum(v, 0.0)
            diffusion = np.sqrt(v_pos * dt)
            log_s += (r - 0.5 * v_pos) * dt + diffusion * z[0]
            v += p.kappa * (p.theta - v_pos) * dt + sigma * diffusion * (p.rho * z[0] + rho_bar * z[1])
        return np.exp(log_s)

    terminal = _simulate(cfg, block)
    MC_PATHS.labels(model=ModelKind.HESTON.value).inc(cfg.n_paths)
    return terminal


def mc_heston_calls(
    p: HestonParams,
    S: float,
    strikes: ArrayLike,
    r: float,
    tau: float,
    cfg: McConfig,
) -> list[McEstimate]:
    """Heston call estimates for a strike ladder on one simulated path set."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    _check_contract(S, strikes, tau)
    terminal = _heston_terminal(p, S, r, tau, cfg)
    discount = math.exp(-r * tau)
    estimates = [_estimate(discount * np.maximum(terminal - K, 0.0), cfg) for K in strikes]
    logger.debug("Heston paths simulated", n_paths=cfg.n_paths, strikes=len(strikes), seed=cfg.seed)
    return estimates


def mc_heston_call(p: HestonParams, S: float, K: float, r: float, tau: float, cfg: McConfig) -> McEstimate:
    return mc_heston_calls(p, S, [K], r, tau, cfg)[0]


def mc_discounted_spot(p: HestonParams, S: float, r: float, tau: float, cfg: McConfig) -> McEstimate:
    """E[e^{-r tau} S_T] under the Euler scheme; equals S for a martingale."""
    _check_contract(S, np.array([1.0]), tau)
    terminal = _heston_terminal(p, S, r, tau, cfg)
    return _estimate(math.exp(-r * tau) * terminal, cfg)


# ─── Black-Scholes ────────────────────────────────────────────

def mc_bs_call(sigma: float, S: float, K: float, r: float, tau: float, cfg: McConfig) -> McEstimate:
    """Exact lognormal terminal draw S_T = S exp((r - sigma^2/2) tau + sigma sqrt(tau) Z)."""
    if not math.isfinite(sigma) or sigma < 0:
        raise InputValidationError(f"sigma must be finite and nonnegative, got {sigma}")
    _check_contract(S, np.array([K], dtype=float), tau)
    drift = (r - 0.5 * sigma * sigma) * tau
    scale = sigma * math.sqrt(tau)

    def block(index: int, m: int) -> NDArray[np.float64]:
        z = _normals(substream(cfg.seed, index), (), m, cfg.antithetic)
        return S * np.exp(drift + scale * z)

    terminal = _simulate(cfg, block)
    MC_PATHS.labels(model=ModelKind.BS.value).inc(cfg.n_paths)
    return _estimate(math.exp(-r * tau) * np.maximum(terminal - K, 0.0), cfg)

