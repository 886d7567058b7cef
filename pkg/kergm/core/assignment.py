"""Discretization of a continuous coupling into a permutation."""

from typing import Literal

import numpy as np
from scipy.optimize import linear_sum_assignment

from kergm.core.utils import as_float_matrix

DiscretizeMethod = Literal["hungarian", "greedy"]


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost assignment; ``perm[i]`` is the column given to row i."""
    cost = as_float_matrix(cost, "cost")
    if cost.size == 0:
        return np.zeros(0, dtype=np.int64)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def greedy_discretize(X: np.ndarray) -> np.ndarray:
    """Repeatedly take the largest remaining entry and retire its row and column.

    Ties go to the first entry in row-major order.
    """
    X = as_float_matrix(X, "X")
    n = X.shape[0]
    work = X.copy()
    perm = np.full(n, -1, dtype=np.int64)
    for _ in range(n):
        i, a = np.unravel_index(int(np.argmax(work)), work.shape)
        perm[i] = a
        work[i, :] = -np.inf
        work[:, a] = -np.inf
    return perm


def discretize_solution(X_star: np.ndarray, method: DiscretizeMethod = "hungarian") -> np.ndarray:
    """Project ``n * X_star`` onto the permutations."""
    X_star = as_float_matrix(X_star, "X")
    scaled = X_star.shape[0] * X_star
    if method == "hungarian":
        return hungarian(-scaled)
    if method == "greedy":
        return greedy_discretize(scaled)
    raise ValueError(f"unknown discretization method {method!r}")
