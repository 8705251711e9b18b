"""
Simplex Optimizer
Nelder-Mead (scipy, standard coefficients, non-adaptive) with an explicit
initial simplex, a hard evaluation budget and a best-so-far trace.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from src.errors import VolcalError

FAILED_LOSS = 1e30
SIMPLEX_STEP = 0.25


@dataclass
class OptimizeResult:
    x: NDArray[np.float64]
    fun: float
    n_evals: int
    converged: bool
    trace: list[float] = field(default_factory=list)


class _BudgetExhausted(Exception):
    pass


def initial_simplex(x0: NDArray[np.float64], step: float = SIMPLEX_STEP) -> NDArray[np.float64]:
    """x0 plus one vertex per axis displaced by `step`."""
    return np.vstack([x0, x0 + step * np.eye(x0.size)])


def minimize(
    f: Callable[[NDArray[np.float64]], float],
    x0: ArrayLike,
    max_evals: int,
    tolerance: float,
    step: float = SIMPLEX_STEP,
) -> OptimizeResult:
    """Minimize f from x0.

    Stops when the spread of simplex losses falls below `tolerance` or after
    `max_evals` evaluations; on budget exhaustion the best point seen is
    returned with converged=False. Evaluations that raise a VolcalError or
    ArithmeticError, or return a nonfinite value, score FAILED_LOSS.
    """
    x0 = np.asarray(x0, dtype=float)
    trace: list[float] = []
    best_x = x0.copy()
    best_f = math.inf

    def objective(x: NDArray[np.float64]) -> float:
        nonlocal best_x, best_f
        if len(trace) >= max_evals:
            raise _BudgetExhausted
        try:
            value = float(f(x))
        except (VolcalError, ArithmeticError):
            value = FAILED_LOSS
        if not math.isfinite(value):
            value = FAILED_LOSS
        if value < best_f:
            best_f, best_x = value, np.array(x, dtype=float)
        trace.append(best_f)
        return value

    try:
        result = optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "maxfev": max_evals,
                "maxiter": 10 * max_evals,
                "fatol": tolerance,
                "xatol": np.inf,
                "adaptive": False,
                "initial_simplex": initial_simplex(x0, step),
            },
        )
        converged = bool(result.success)
    except _BudgetExhausted:
        converged = False

    return OptimizeResult(x=best_x, fun=best_f, n_evals=len(trace), converged=converged, trace=trace)
