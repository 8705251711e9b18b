"""
Error Hierarchy
Exceptions raised across volcal. Each class carries the process exit code
the CLI reports when the error escapes a subcommand.
"""

from __future__ import annotations


class VolcalError(Exception):
    """Base class for all volcal errors."""

    exit_code: int = 1


class InputValidationError(VolcalError, ValueError):
    """Malformed input: bad CSV rows, invariant violations, bad arguments."""

    exit_code = 2


class NumericalError(VolcalError, ArithmeticError):
    """A computation produced a nonfinite or otherwise unusable value."""

    exit_code = 3


class QuadratureError(NumericalError):
    """A quadrature rule failed to self-converge within its node budget."""

    exit_code = 3


class CalibrationError(VolcalError):
    """No calibration start produced a finite loss."""

    exit_code = 4
