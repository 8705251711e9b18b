"""
Engine Metrics & Observability
Prometheus metrics for pricing, calibration and simulation workloads.

The CLI dumps the default registry with `write_to_textfile` when asked to, so
batch runs can feed a node-exporter textfile collector.
"""

from __future__ import annotations

import time
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from functools import wraps
from pathlib import Path
from typing import Any, TypeVar

from prometheus_client import REGISTRY, Counter, Histogram, Info, write_to_textfile

F = TypeVar("F", bound=Callable[..., Any])


# ─── Calibration Metrics ──────────────────────────────────────

CALIBRATION_RUNS = Counter(
    "volcal_calibration_runs_total",
    "Total calibration runs",
    ["model", "status"],
)

CALIBRATION_DURATION = Histogram(
    "volcal_calibration_duration_seconds",
    "Wall-clock duration of a full multi-start calibration",
    ["model"],
    buckets=[0.05, 0.1, 0.25, 0.5, 1, 2.5, 5, 10, 30, 60, 120, 300, 600],
)

LOSS_EVALUATIONS = Counter(
    "volcal_loss_evaluations_total",
    "Objective evaluations performed by the optimizer",
    ["model"],
)

# ─── Pricing Metrics ──────────────────────────────────────────

PRICE_EVALUATIONS = Counter(
    "volcal_price_evaluations_total",
    "Option prices computed",
    ["model"],
)

QUADRATURE_NODES = Histogram(
    "volcal_quadrature_nodes",
    "Gauss-Legendre node count at which the Heston integrals converged",
    buckets=[64, 128, 256, 512, 1024],
)

# ─── Simulation Metrics ───────────────────────────────────────

MC_PATHS = Counter(
    "volcal_mc_paths_total",
    "Monte-Carlo paths simulated",
    ["model"],
)

STAGE_DURATION = Histogram(
    "volcal_stage_duration_seconds",
    "Duration of CLI stages",
    ["stage"],
    buckets=[0.01, 0.1, 0.5, 1, 5, 10, 30, 60, 300, 900],
)

# ─── Build Info ───────────────────────────────────────────────

BUILD_INFO = Info("volcal", "Engine build information")
BUILD_INFO.info({
    "version": "0.1.0",
    "component": "volcal",
})


# ─── Decorators ───────────────────────────────────────────────

def track_calibration(model: str) -> Callable[[F], F]:
    """Decorator recording run status and duration of a calibration call."""

    def decorator(func: F) -> F:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
                CALIBRATION_RUNS.labels(model=model, status="success").inc()
                return result
            except Exception:
                CALIBRATION_RUNS.labels(model=model, status="error").inc()
                raise
            finally:
                CALIBRATION_DURATION.labels(model=model).observe(time.perf_counter() - start)

        return wrapper  # type: ignore[return-value]

    return decorator


@contextmanager
def track_stage(stage: str) -> Iterator[None]:
    """Context manager timing one CLI stage."""
    start = time.perf_counter()
    try:
        yield
    finally:
        STAGE_DURATION.labels(stage=stage).observe(time.perf_counter() - start)


def dump_metrics(path: Path) -> None:
    """Write the default registry in Prometheus text exposition format."""
    write_to_textfile(str(path), REGISTRY)
