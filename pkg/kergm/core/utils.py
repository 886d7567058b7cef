"""Utility functions shared across the library."""

import hashlib
from typing import Any

import numpy as np

from kergm.core.errors import DimensionError

# Counter-based bit generator: streams reproduce across platforms and numpy versions
# that keep the Philox4x64 implementation.
RNG_NAME = "numpy.random.Philox"
SEED_DERIVATION = "blake2b-64(master_seed, point, trial)"


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Create the package's seeded random generator."""
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(master_seed: int, point: Any, trial: int) -> int:
    """Derive a per-trial seed from the master seed, sweep point and trial index.

    The hash depends only on these three values, so adding sweep points or trials
    leaves the seeds of existing trials unchanged.

    Args:
        master_seed: Seed of the whole run
        point: Sweep value (int, float or str); hashed through its repr
        trial: Trial index within the sweep point

    Returns:
        Non-negative 63-bit integer seed
    """
    payload = f"{int(master_seed)}|{point!r}|{int(trial)}".encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little") & ((1 << 63) - 1)


def as_float_matrix(values: Any, name: str = "matrix") -> np.ndarray:
    """Convert to a 2-D float64 array, rejecting other ranks."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def check_square(X: np.ndarray, n: int, name: str = "X") -> np.ndarray:
    """Validate that X is an n x n float matrix and return it as float64."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.shape != (n, n):
        raise DimensionError(f"{name} must have shape ({n}, {n}), got {arr.shape}")
    return arr


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    """Dense permutation matrix with X[i, perm[i]] = 1."""
    perm = np.asarray(perm, dtype=np.int64)
    n = perm.shape[0]
    X = np.zeros((n, n))
    X[np.arange(n), perm] = 1.0
    return X
