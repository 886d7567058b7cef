"""Exception hierarchy and exit codes."""

from typing import Optional

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_ORACLE = 4


class KergmError(Exception):
    """Base class for all errors raised by kergm."""

    exit_code = EXIT_SOLVER


class ConfigError(KergmError):
    """Invalid configuration or command-line usage."""

    exit_code = EXIT_USAGE


class GraphFormatError(KergmError):
    """Malformed graph or ground-truth file."""

    exit_code = EXIT_INPUT


class DimensionError(KergmError, ValueError):
    """Sizes or attribute dimensions of the operands disagree."""

    exit_code = EXIT_INPUT


class DomainError(KergmError, ValueError):
    """An argument lies outside the domain of the function (e.g. negative entries for entropy)."""

    exit_code = EXIT_INPUT


class CapExceededError(KergmError):
    """A small-n oracle was asked to handle a problem above its size cap."""

    exit_code = EXIT_USAGE


class SinkhornError(KergmError):
    """Sinkhorn-Knopp scaling did not reach the marginal tolerance.

    Carries the best iterate seen and its marginal error so callers can
    inspect how far off the solve was.
    """

    exit_code = EXIT_SOLVER

    def __init__(
        self,
        message: str,
        best: Optional[np.ndarray] = None,
        marginal_error: float = float("inf"),
        iterations: int = 0,
    ):
        super().__init__(message)
        self.best = best
        self.marginal_error = marginal_error
        self.iterations = iterations

