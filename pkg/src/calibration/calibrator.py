"""
Model Calibrator
Fits BS, Heston or MSV parameters to a quote dataset by minimizing the sum of
squared price errors with a seeded multi-start Nelder-Mead.

Result documents are byte-stable for a fixed (dataset, config): wall-clock
time is kept out of the main document and written to a `.timing.json`
sidecar next to it.
"""

from __future__ import annotations

import json
import math
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Literal

import numpy as np
import structlog
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.calibration.optimizer import FAILED_LOSS, OptimizeResult, minimize
from src.calibration.transforms import is_log_coordinate, transform_to_unbounded, untransform
from src.errors import CalibrationError, InputValidationError
from src.market_data.models import Dataset
from src.observability.metrics import LOSS_EVALUATIONS, track_calibration
from src.pricing.engine import price_arrays, price_dataset, quote_arrays
from src.pricing.models import (
    PARAMS_BY_MODEL,
    BsParams,
    HestonParams,
    ModelKind,
    ModelParams,
    MsvParams,
    params_to_dict,
)
from src.pricing.msv import DEFAULT_ORDER
from src.streams import SEED_MAX, substream

logger = structlog.get_logger()

DEFAULT_STARTS: dict[ModelKind, ModelParams] = {
    ModelKind.BS: BsParams(sigma=0.2),
    ModelKind.HESTON: HestonParams(v0=0.04, kappa=1.5, theta=0.04, vol_of_vol=0.5, rho=-0.5),
    ModelKind.MSV: MsvParams(sigma0_hat=0.2, sigma1_hat=0.1, sigma2_hat=0.2, lam=1.0, k=0.1),
}

JITTER_DOMAIN = 1


class CalibrationConfig(BaseModel):
    """Optimizer budget and multi-start settings."""

    model_config = ConfigDict(frozen=True)

    model: ModelKind
    loss_kind: Literal["sse", "rmse"] = "sse"
    max_evals: int = Field(default=2000, ge=100)
    n_starts: int = Field(default=3, ge=1)
    tolerance: float = Field(default=1e-12, gt=0)
    seed: int = Field(default=20170307, ge=0, le=SEED_MAX)
    feller_penalty_weight: float = Field(default=0.0, ge=0)
    order: Literal[2, 3, 4] = DEFAULT_ORDER
    workers: int = Field(default=1, ge=1, exclude=True)


class CalibrationResult(BaseModel):
    """Winning start of a calibration run."""

    model_config = ConfigDict(frozen=True)

    model: ModelKind
    params: dict[str, float]
    loss: float = Field(..., ge=0)
    n_evals: int = Field(..., ge=1)
    start_index: int = Field(..., ge=0)
    converged: bool
    dataset_label: str
    dataset_fingerprint: str
    config: dict[str, Any]
    elapsed_seconds: float | None = Field(default=None, gt=0, exclude=True)

    def typed_params(self) -> ModelParams:
        return PARAMS_BY_MODEL[self.model].model_validate(self.params)  # type: ignore[return-value]


# ─── Loss ─────────────────────────────────────────────────────

def feller_penalty(params: ModelParams, weight: float) -> float:
    """weight * max(0, vol_of_vol^2 - 2 kappa theta)^2 for Heston, else 0."""
    if weight == 0.0 or not isinstance(params, HestonParams):
        return 0.0
    gap = max(0.0, params.vol_of_vol**2 - 2.0 * params.kappa * params.theta)
    return weight * gap * gap


def loss(
    params: ModelParams,
    ds: Dataset,
    model: ModelKind,
    feller_penalty_weight: float = 0.0,
    order: int = DEFAULT_ORDER,
) -> float:
    """Sum of squared price errors over `ds`, plus the optional Feller penalty.

    Raises:
        NumericalError: pricing failed; the message names the quote.
    """
    _, _, _, _, mid = quote_arrays(ds)
    prices = price_dataset(model, params, ds, order=order)
    return float(np.sum((prices - mid) ** 2)) + feller_penalty(params, feller_penalty_weight)


def _objective(ds: Dataset, cfg: CalibrationConfig) -> Callable[[NDArray[np.float64]], float]:
    S, K, r, tau, mid = quote_arrays(ds)
    n = len(mid)
    evals = LOSS_EVALUATIONS.labels(model=cfg.model.value)

    def f(x: NDArray[np.float64]) -> float:
        evals.inc()
        params = untransform(x, cfg.model)
        prices = price_arrays(cfg.model, params, S, K, r, tau, order=cfg.order)
        sse = float(np.sum((prices - mid) ** 2)) + feller_penalty(params, cfg.feller_penalty_weight)
        return math.sqrt(sse / n) if cfg.loss_kind == "rmse" else sse

    return f


# ─── Multi-start ──────────────────────────────────────────────

def start_points(cfg: CalibrationConfig) -> list[NDArray[np.float64]]:
    """Start 0 is the default center; later starts jitter it from seeded substreams.

    Log coordinates move by log(U(0.5, 1.5)), the atanh(rho) coordinate by U(-0.2, 0.2).
    """
    center = transform_to_unbounded(DEFAULT_STARTS[cfg.model], cfg.model)
    points = [center]
    for i in range(1, cfg.n_starts):
        rng = substream(cfg.seed, i, domain=JITTER_DOMAIN)
        shifted = center.copy()
        for idx in range(center.size):
            if is_log_coordinate(cfg.model, idx):
                shifted[idx] += math.log(rng.uniform(0.5, 1.5))
            else:
                shifted[idx] += rng.uniform(-0.2, 0.2)
        points.append(shifted)
    return points


def _run(ds: Dataset, cfg: CalibrationConfig) -> CalibrationResult:
    if len(ds) == 0:
        raise InputValidationError(f"cannot calibrate on empty dataset {ds.label!r}")
    started = time.perf_counter()
    f = _objective(ds, cfg)
    points = start_points(cfg)

    def run_start(index: int) -> OptimizeResult:
        result = minimize(f, points[index], max_evals=cfg.max_evals, tolerance=cfg.tolerance)
        logger.info(
            "Calibration start finished",
            model=cfg.model.value,
            start_index=index,
            loss=result.fun,
            n_evals=result.n_evals,
            converged=result.converged,
        )
        return result

    if cfg.workers > 1 and cfg.n_starts > 1:
        with ThreadPoolExecutor(max_workers=min(cfg.workers, cfg.n_starts)) as pool:
            outcomes = list(pool.map(run_start, range(cfg.n_starts)))
    else:
        outcomes = [run_start(i) for i in range(cfg.n_starts)]

    finite = [(res.fun, i) for i, res in enumerate(outcomes) if res.fun < FAILED_LOSS]
    if not finite:
        raise CalibrationError(f"all {cfg.n_starts} {cfg.model.value} starts failed on {ds.label!r}")
    best_loss, best_index = min(finite)
    best = outcomes[best_index]
    params = untransform(best.x, cfg.model)
    elapsed = time.perf_counter() - started

    result = CalibrationResult(
        model=cfg.model,
        params=params_to_dict(params),
        loss=best_loss,
        n_evals=sum(res.n_evals for res in outcomes),
        start_index=best_index,
        converged=best.converged,
        dataset_label=ds.label,
        dataset_fingerprint=ds.fingerprint(),
        config=cfg.model_dump(mode="json"),
        elapsed_seconds=max(elapsed, 1e-9),
    )
    logger.info(
        "Calibration completed",
        model=cfg.model.value,
        dataset=ds.label,
        loss=best_loss,
        n_evals=result.n_evals,
        start_index=best_index,
        elapsed_seconds=round(elapsed, 4),
    )
    return result


def calibrate(ds: Dataset, cfg: CalibrationConfig) -> CalibrationResult:
    """Fit cfg.model to `ds`; elapsed_seconds covers the whole multi-start run.

    Raises:
        CalibrationError: no start reached a finite loss.
    """
    return track_calibration(cfg.model.value)(_run)(ds, cfg)


# ─── Documents ────────────────────────────────────────────────

def timing_path(path: Path) -> Path:
    return Path(path).with_suffix(".timing.json")


def write_timing(path: Path, timing: dict[str, Any]) -> Path:
    """Write wall times beside a result document, which stays byte-stable without them."""
    sidecar = timing_path(path)
    sidecar.write_text(json.dumps(timing, indent=2) + "\n", encoding="utf-8")
    return sidecar


def write_calibration(result: CalibrationResult, path: Path) -> Path:
    """Write the calibration document and its timing sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")
    if result.elapsed_seconds is not None:
        write_timing(path, {"model": result.model.value, "elapsed_seconds": result.elapsed_seconds})
    return path


def read_calibration(path: Path) -> CalibrationResult:
    """Read a calibration document, attaching the timing sidecar when present."""
    path = Path(path)
    try:
        result = CalibrationResult.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as e:
        raise InputValidationError(f"cannot read calibration file {path}: {e}") from e
    except ValidationError as e:
        raise InputValidationError(f"invalid calibration file {path}: {e.errors()[0]['msg']}") from e
    try:
        result.typed_params()
    except ValidationError as e:
        raise InputValidationError(f"calibration file {path} holds invalid {result.model.value} params") from e

    elapsed = read_timing(path).get("elapsed_seconds")
    if isinstance(elapsed, (int, float)) and not isinstance(elapsed, bool) and elapsed > 0:
        result = result.model_copy(update={"elapsed_seconds": float(elapsed)})
    return result


def read_timing(path: Path) -> dict[str, Any]:
    """Wall-time sidecar of a result document; empty when there is none.

    Raises:
        InputValidationError: the sidecar exists but is not a JSON object.
    """
    sidecar = timing_path(Path(path))
    if not sidecar.exists():
        return {}
    try:
        data = json.loads(sidecar.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InputValidationError(f"invalid timing file {sidecar}: {e}") from e
    if not isinstance(data, dict):
        raise InputValidationError(f"timing file {sidecar} must hold a JSON object")
    return data
