"""Kernelized QAP objective, relaxations and small-n oracles.

Matrices ``X`` are n x n with ``X[i, a]`` coupling node i of graph 1 to node a of
graph 2. Where a vectorized form is needed, ``vec`` is column-major:
``vec(X)[a * n + i] = X[i, a]``.

    J_gm(X)    = -<K^N, X> - <X, C(X)>,   C(X) = cross gram of X
    J_aux(X)   = 1/2 <S1, X X^T> + 1/2 <S2, X^T X>
    J_alpha(X) = J_gm(X) + (1 - 2 alpha) J_aux(X)
    F_alpha(X) = J_alpha(X) with K^N / n  +  lambda * sum X log X
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Protocol

import numpy as np
from scipy.special import xlogy

from kergm.core.errors import CapExceededError, ConfigError, DimensionError, DomainError
from kergm.core.features import (
    DEFAULT_TABLE_BUDGET,
    ExactCrossGram,
    FeatureArray,
    FeatureMap,
    LinearFeatureMap,
    build_feature_array,
    cross_gram,
    exact_gram_self,
    gram_self,
    sample_fourier_map,
)
from kergm.core.graph import AttributedGraph, pad_with_dummy_nodes
from kergm.core.kernels import KernelConfig, build_node_affinity, pairwise_kernel
from kergm.core.utils import check_square

logger = logging.getLogger(__name__)

BackendName = Literal["exact", "rff"]

LAWLER_CAP = 30
BRUTE_FORCE_CAP = 10


class EdgeBackend(Protocol):
    name: str

    def gram1(self) -> np.ndarray: ...

    def gram2(self) -> np.ndarray: ...

    def cross(self, X: np.ndarray) -> np.ndarray: ...

    def edge_table(self) -> np.ndarray: ...


class FeatureBackend:
    """Explicit-feature path: products over D sparse slices, O(D n^3) per gradient."""

    name = "feature-array"

    def __init__(self, psi1: FeatureArray, psi2: FeatureArray, fmap: FeatureMap,
                 g1: AttributedGraph, g2: AttributedGraph):
        self.psi1, self.psi2, self.fmap = psi1, psi2, fmap
        self._g1, self._g2 = g1, g2

    def gram1(self) -> np.ndarray:
        return gram_self(self.psi1)

    def gram2(self) -> np.ndarray:
        return gram_self(self.psi2)

    def cross(self, X: np.ndarray) -> np.ndarray:
        return cross_gram(self.psi1, X, self.psi2)

    def edge_table(self) -> np.ndarray:
        f1 = self.fmap.apply(self._g1.edge_attrs) if self._g1.m else np.zeros((0, self.fmap.dim))
        f2 = self.fmap.apply(self._g2.edge_attrs) if self._g2.m else np.zeros((0, self.fmap.dim))
        return f1 @ f2.T


class ExactBackend:
    """Exact-kernel path: kernel sums over common neighbours and edge pairs."""

    name = "exact-kernel"

    def __init__(self, g1: AttributedGraph, g2: AttributedGraph, cfg: KernelConfig,
                 memory_budget: int = DEFAULT_TABLE_BUDGET):
        self.g1, self.g2, self.cfg = g1, g2, cfg
        self._cross = ExactCrossGram(g1, g2, cfg, memory_budget)

    def gram1(self) -> np.ndarray:
        return exact_gram_self(self.g1, self.cfg)

    def gram2(self) -> np.ndarray:
        return exact_gram_self(self.g2, self.cfg)

    def cross(self, X: np.ndarray) -> np.ndarray:
        return self._cross(X)

    def edge_table(self) -> np.ndarray:
        return self._cross.table()


@dataclass(frozen=True, eq=False)
class QapInstance:
    """A prepared matching problem between two equal-size graphs."""

    g1: AttributedGraph
    g2: AttributedGraph
    kn_raw: np.ndarray
    backend: EdgeBackend
    s1: np.ndarray
    s2: np.ndarray
    c_aux: float

    @property
    def n(self) -> int:
        return self.g1.n

    @property
    def kn(self) -> np.ndarray:
        """Node affinity scaled by 1/n, as used inside F_alpha."""
        return self.kn_raw / max(self.n, 1)

    def node_affinity(self, normalized: bool) -> np.ndarray:
        return self.kn if normalized else self.kn_raw


def instance_from_backend(
    g1: AttributedGraph, g2: AttributedGraph, backend: EdgeBackend, kn_raw: np.ndarray
) -> QapInstance:
    s1, s2 = backend.gram1(), backend.gram2()
    c_aux = 0.5 * (float(np.trace(s1)) + float(np.trace(s2)))
    return QapInstance(g1, g2, np.asarray(kn_raw, dtype=np.float64), backend, s1, s2, c_aux)


def prepare_instance(
    g1: AttributedGraph,
    g2: AttributedGraph,
    edge_kernel: KernelConfig,
    node_kernel: Optional[KernelConfig] = None,
    backend: BackendName = "rff",
    dim: int = 20,
    seed: int = 0,
    fourier_convention: Literal["kernel", "literal"] = "kernel",
    memory_budget: int = DEFAULT_TABLE_BUDGET,
) -> QapInstance:
    """Pad the graphs to equal size and precompute grams for the chosen backend.

    The ``rff`` backend uses the identity feature map for the linear kernel and
    random Fourier features (dimension ``dim``, shared by both graphs) for the
    squared-distance Gaussian kernel.
    """
    g1, g2 = pad_with_dummy_nodes(g1, g2)
    if g1.m and g2.m and g1.d_edge != g2.d_edge:
        raise DimensionError(f"edge attribute dimensions differ: {g1.d_edge} vs {g2.d_edge}")
    kn_raw = build_node_affinity(g1, g2, node_kernel)
    d_edge = g1.d_edge if g1.m else g2.d_edge
    if backend == "exact":
        be: EdgeBackend = ExactBackend(g1, g2, edge_kernel, memory_budget)
    elif backend == "rff":
        if edge_kernel.kind == "linear":
            fmap: FeatureMap = LinearFeatureMap(d_edge)
        elif edge_kernel.kind == "gaussian_sq":
            fmap = sample_fourier_map(edge_kernel.effective_gamma, dim, d_edge, seed,
                                      fourier_convention)
        else:
            raise ConfigError(
                f"the rff backend supports linear and gaussian_sq kernels, not {edge_kernel.kind}"
            )
        be = FeatureBackend(build_feature_array(g1, fmap), build_feature_array(g2, fmap),
                            fmap, g1, g2)
    else:
        raise ConfigError(f"unknown backend {backend!r}")
    inst = instance_from_backend(g1, g2, be, kn_raw)
    logger.debug("prepared %s instance n=%d c_aux=%.6g", be.name, inst.n, inst.c_aux)
    return inst


def _check(inst: QapInstance, X: np.ndarray) -> np.ndarray:
    return check_square(X, inst.n)


def quadratic_term(inst: QapInstance, X: np.ndarray, cross: Optional[np.ndarray] = None) -> float:
    """Edge alignment ``<Psi1 ⊙ X, X ⊙ Psi2>`` evaluated as ``<X, C(X)>``."""
    X = _check(inst, X)
    if cross is None:
        cross = inst.backend.cross(X)
    return float(np.vdot(X, cross))


def objective_gm(inst: QapInstance, X: np.ndarray, normalized: bool = False) -> float:
    """``J_gm(X) = -<K^N, X> - <Psi1 ⊙ X, X ⊙ Psi2>`` with the raw node affinity by default."""
    X = _check(inst, X)
    return -float(np.vdot(inst.node_affinity(normalized), X)) - quadratic_term(inst, X)


def j_aux(inst: QapInstance, X: np.ndarray) -> float:
    X = _check(inst, X)
    return 0.5 * float(np.vdot(inst.s1, X @ X.T)) + 0.5 * float(np.vdot(inst.s2, X.T @ X))


def j_vex(inst: QapInstance, X: np.ndarray) -> float:
    return objective_gm(inst, X) + j_aux(inst, X)


def j_cav(inst: QapInstance, X: np.ndarray) -> float:
    return objective_gm(inst, X) - j_aux(inst, X)


def j_alpha(inst: QapInstance, X: np.ndarray, alpha: float, normalized: bool = False) -> float:
    """``(1 - alpha) J_vex + alpha J_cav = J_gm + (1 - 2 alpha) J_aux``."""
    return objective_gm(inst, X, normalized) + (1.0 - 2.0 * alpha) * j_aux(inst, X)


def grad_j_alpha(
    inst: QapInstance,
    X: np.ndarray,
    alpha: float,
    normalized: bool = False,
    cross: Optional[np.ndarray] = None,
) -> np.ndarray:
    """``(1 - 2 alpha)(S1 X + X S2) - 2 C(X) - K^N``."""
    X = _check(inst, X)
    if cross is None:
        cross = inst.backend.cross(X)
    return ((1.0 - 2.0 * alpha) * (inst.s1 @ X + X @ inst.s2)
            - 2.0 * cross - inst.node_affinity(normalized))


def hessian_apply(inst: QapInstance, D: np.ndarray, alpha: float,
                  cross: Optional[np.ndarray] = None) -> np.ndarray:
    """Homogeneous (linear) part of the gradient map applied to D."""
    if cross is None:
        cross = inst.backend.cross(D)
    return (1.0 - 2.0 * alpha) * (inst.s1 @ D + D @ inst.s2) - 2.0 * cross


def entropy(X: np.ndarray) -> float:
    """Negative entropy ``sum X log X`` with ``0 log 0 = 0``."""
    X = np.asarray(X, dtype=np.float64)
    if np.any(X < 0):
        raise DomainError(f"entropy needs nonnegative entries, min is {X.min():.3g}")
    return float(xlogy(X, X).sum())


def f_alpha(inst: QapInstance, X: np.ndarray, alpha: float, lam: float) -> float:
    return j_alpha(inst, X, alpha, normalized=True) + lam * entropy(X)


def lawler_affinity_oracle(
    g1: AttributedGraph, g2: AttributedGraph, cfg: KernelConfig, cap: int = LAWLER_CAP
) -> np.ndarray:
    """Explicit n^2 x n^2 affinity ``K[a*n + i, b*n + j] = k(q1_ij, q2_ab)`` on edge pairs."""
    if g1.n != g2.n:
        raise DimensionError(f"graphs must have equal size, got {g1.n} and {g2.n}")
    n = g1.n
    if n > cap:
        raise CapExceededError(f"affinity oracle is capped at n={cap}, got n={n}")
    K = np.zeros((n * n, n * n))
    if g1.m == 0 or g2.m == 0:
        return K
    i, j, q1 = g1.directed_edges()
    a, b, q2 = g2.directed_edges()
    T = pairwise_kernel(cfg, q1, q2)
    rows = a[None, :] * n + i[:, None]
    cols = b[None, :] * n + j[:, None]
    K[rows, cols] = T
    return K


def brute_force_qap(inst: QapInstance, cap: int = BRUTE_FORCE_CAP,
                    chunk: int = 20000) -> tuple[np.ndarray, float]:
    """Exhaustive minimizer of J_gm over all permutations (first minimizer on ties)."""
    n = inst.n
    if n > cap:
        raise CapExceededError(f"brute force is capped at n={cap}, got n={n}")
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    g1, g2 = inst.g1, inst.g2
    T = inst.backend.edge_table()
    edge_index = np.full((n, n), -1, dtype=np.int64)
    edge_index[g2.edges[:, 0], g2.edges[:, 1]] = np.arange(g2.m)
    edge_index[g2.edges[:, 1], g2.edges[:, 0]] = np.arange(g2.m)
    u, v = g1.edges[:, 0], g1.edges[:, 1]
    r = np.arange(g1.m)

    best_perm, best_val = None, np.inf
    perms = itertools.permutations(range(n))
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        node = inst.kn_raw[np.arange(n)[None, :], block].sum(axis=1)
        if g1.m and g2.m:
            s = edge_index[block[:, u], block[:, v]]
            hit = s >= 0
            edge = 2.0 * np.where(hit, T[r[None, :], np.where(hit, s, 0)], 0.0).sum(axis=1)
        else:
            edge = np.zeros(block.shape[0])
        vals = -node - edge
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_perm = float(vals[k]), block[k].copy()
    return best_perm, best_val
