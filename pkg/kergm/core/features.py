"""Feature arrays and the H-operation products used by the gradient.

A Hilbert array assigns a feature vector to every ordered node pair of a graph:
``psi(q_ij)`` on edges, the zero vector elsewhere. With an explicit D-dimensional
map it is stored as D sparse n x n slices sharing one sparsity pattern, and

    gram_self(psi)          = sum_d psi[d] @ psi[d]
    cross_gram(psi1, X, psi2) = sum_d psi1[d] @ X @ psi2[d]

With the exact kernel the same quantities are obtained by summing kernel values
over common neighbours (gram) or over pairs of edges (cross gram).
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Protocol

import numpy as np
import scipy.sparse as sp

from kergm.core.errors import ConfigError, DimensionError
from kergm.core.graph import AttributedGraph
from kergm.core.kernels import KernelConfig, pairwise_kernel
from kergm.core.utils import check_square, make_rng

logger = logging.getLogger(__name__)

# Slices denser than this are multiplied as dense matrices.
DENSE_SLICE_DENSITY = 0.1
DEFAULT_TABLE_BUDGET = 2 * 1024**3


class FeatureMap(Protocol):
    @property
    def dim(self) -> int: ...

    @property
    def input_dim(self) -> int: ...

    def apply(self, Q: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class FourierFeatureMap:
    """Random Fourier features ``sqrt(2/D) * cos(omega_i^T q + b_i)``.

    ``convention="kernel"`` draws ``omega ~ N(0, 2 gamma I)`` and ``b ~ U[0, 2 pi]``,
    which approximates ``exp(-gamma ||q1 - q2||^2)``. ``convention="literal"`` draws
    ``omega ~ N(0, gamma^2 I)`` and ``b ~ U[0, 1]``.
    """

    omegas: np.ndarray
    phases: np.ndarray
    gamma: float
    convention: str = "kernel"

    @property
    def dim(self) -> int:
        return int(self.omegas.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.omegas.shape[1])

    @property
    def normalizer(self) -> float:
        return float(np.sqrt(2.0 / self.dim))

    def apply(self, Q: np.ndarray) -> np.ndarray:
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[1] != self.input_dim:
            raise DimensionError(
                f"attributes must have {self.input_dim} columns, got shape {Q.shape}"
            )
        return self.normalizer * np.cos(Q @ self.omegas.T + self.phases[None, :])


@dataclass(frozen=True)
class LinearFeatureMap:
    """Identity embedding; reproduces the linear kernel exactly."""

    input_dim: int

    @property
    def dim(self) -> int:
        return self.input_dim

    def apply(self, Q: np.ndarray) -> np.ndarray:
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[1] != self.input_dim:
            raise DimensionError(
                f"attributes must have {self.input_dim} columns, got shape {Q.shape}"
            )
        return Q.copy()


def sample_fourier_map(
    gamma: float,
    D: int,
    d_edge: int,
    seed: int,
    convention: Literal["kernel", "literal"] = "kernel",
) -> FourierFeatureMap:
    """Draw a Fourier feature map for the Gaussian kernel of bandwidth gamma."""
    if D < 1:
        raise ConfigError(f"feature dimension D must be >= 1, got {D}")
    if gamma <= 0:
        raise ConfigError(f"gamma must be > 0, got {gamma}")
    rng = make_rng(seed)
    normals = rng.standard_normal((D, d_edge))
    if convention == "kernel":
        omegas = np.sqrt(2.0 * gamma) * normals
        phases = rng.uniform(0.0, 2.0 * np.pi, D)
    elif convention == "literal":
        omegas = gamma * normals
        phases = rng.uniform(0.0, 1.0, D)
    else:
        raise ConfigError(f"unknown Fourier convention {convention!r}")
    omegas.setflags(write=False)
    phases.setflags(write=False)
    return FourierFeatureMap(omegas, phases, float(gamma), convention)


def apply_fourier_map(fmap: FourierFeatureMap, q) -> np.ndarray:
    """Feature vector of a single attribute vector."""
    q = np.atleast_1d(np.asarray(q, dtype=np.float64))
    return fmap.apply(q[None, :])[0]


@dataclass(frozen=True, eq=False)
class FeatureArray:
    """D sparse n x n slices with a shared CSR pattern holding both edge orientations."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray  # (D, nnz)

    @property
    def D(self) -> int:
        return int(self.values.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    @property
    def density(self) -> float:
        return self.nnz / float(self.n * self.n) if self.n else 0.0

    @cached_property
    def slices(self) -> list[sp.csr_matrix]:
        shape = (self.n, self.n)
        return [
            sp.csr_matrix((self.values[d], self.indices, self.indptr), shape=shape)
            for d in range(self.D)
        ]

    @cached_property
    def dense(self) -> np.ndarray:
        """Hilbert array as a dense ``(D, n, n)`` array."""
        out = np.zeros((self.D, self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        out[:, rows, self.indices] = self.values
        return out

    @property
    def use_dense(self) -> bool:
        return self.density >= DENSE_SLICE_DENSITY


def build_feature_array(g: AttributedGraph, fmap: FeatureMap) -> FeatureArray:
    """Feature array of a graph: ``psi(q_ij)`` at (i, j) and (j, i) for every edge."""
    src, dst, attrs = g.directed_edges()
    if g.m and attrs.shape[1] != fmap.input_dim:
        raise DimensionError(
            f"graph has {attrs.shape[1]}-dimensional edge attributes, map expects {fmap.input_dim}"
        )
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    feats = fmap.apply(attrs[order]) if g.m else np.zeros((0, fmap.dim))
    indptr = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=g.n), out=indptr[1:])
    values = np.ascontiguousarray(feats.T)
    return FeatureArray(g.n, indptr, dst.astype(np.int64), values)


def gram_self(psi: FeatureArray) -> np.ndarray:
    """``sum_d psi[d] @ psi[d]``, the star product of the array with itself."""
    if psi.use_dense:
        A = psi.dense
        out = np.zeros((psi.n, psi.n))
        for d in range(psi.D):
            out += A[d] @ A[d]
        return out
    out = sp.csr_matrix((psi.n, psi.n))
    for s in psi.slices:
        out = out + s @ s
    return out.toarray()


def cross_gram(psi1: FeatureArray, X: np.ndarray, psi2: FeatureArray) -> np.ndarray:
    """``sum_d psi1[d] @ X @ psi2[d]``; linear in X."""
    if psi1.n != psi2.n or psi1.D != psi2.D:
        raise DimensionError(
            f"feature arrays disagree: n={psi1.n}/{psi2.n}, D={psi1.D}/{psi2.D}"
        )
    X = check_square(X, psi1.n)
    out = np.zeros((psi1.n, psi1.n))
    if psi1.use_dense or psi2.use_dense:
        A, B = psi1.dense, psi2.dense
        for d in range(psi1.D):
            out += A[d] @ (X @ B[d])
        return out
    for s1, s2 in zip(psi1.slices, psi2.slices):
        # slices are symmetric, so X @ s2 == (s2 @ X.T).T
        out += s1 @ np.asarray(s2 @ X.T).T
    return out


def exact_gram_self(g: AttributedGraph, cfg: KernelConfig) -> np.ndarray:
    """``S[i, j] = sum_k k(q_ik, q_kj)`` over the common neighbours k of i and j."""
    S = np.zeros((g.n, g.n))
    if g.m == 0:
        return S
    src, dst, attrs = g.directed_edges()
    order = np.argsort(src, kind="stable")
    counts = np.bincount(src, minlength=g.n)
    starts = np.concatenate([[0], np.cumsum(counts)])
    for k in range(g.n):
        idx = order[starts[k]:starts[k + 1]]
        if idx.size == 0:
            continue
        nbrs = dst[idx]
        S[np.ix_(nbrs, nbrs)] += pairwise_kernel(cfg, attrs[idx], attrs[idx])
    return S


class ExactCrossGram:
    """Cross gram ``M[i, a] = sum_{(i,k) in E1, (c,a) in E2} X[k, c] k(q1_ik, q2_ca)``.

    The m1 x m2 table of edge-kernel values is computed on first use and cached
    when it fits in ``memory_budget`` bytes; otherwise it is recomputed in row
    blocks on every call.
    """

    def __init__(
        self,
        g1: AttributedGraph,
        g2: AttributedGraph,
        cfg: KernelConfig,
        memory_budget: int = DEFAULT_TABLE_BUDGET,
    ):
        if g1.n != g2.n:
            raise DimensionError(f"graphs must have equal size, got {g1.n} and {g2.n}")
        if g1.m and g2.m and g1.d_edge != g2.d_edge:
            raise DimensionError(
                f"edge attribute dimensions differ: {g1.d_edge} vs {g2.d_edge}"
            )
        self.g1, self.g2, self.cfg = g1, g2, cfg
        self.n = g1.n
        self.memory_budget = int(memory_budget)
        self._table: np.ndarray | None = None
        self.cached = g1.m * g2.m * 8 <= self.memory_budget
        self._block_rows = max(1, self.memory_budget // max(1, 8 * g2.m))
        # Orientation o of edge (u, v) reads as u -> v for o = 0 and v -> u for o = 1.
        e1, e2 = g1.edges, g2.edges
        self._orient1 = [(e1[:, 0], e1[:, 1]), (e1[:, 1], e1[:, 0])]
        self._orient2 = [(e2[:, 0], e2[:, 1]), (e2[:, 1], e2[:, 0])]

    def table(self) -> np.ndarray:
        """Full m1 x m2 kernel table (computed once when cached)."""
        if self._table is not None:
            return self._table
        table = pairwise_kernel(self.cfg, self.g1.edge_attrs, self.g2.edge_attrs)
        if self.cached:
            self._table = table
            logger.debug("cached %dx%d edge-kernel table", *table.shape)
        return table

    def _incidence(self, rows: np.ndarray, count: int) -> sp.csr_matrix:
        data = np.ones(rows.size)
        return sp.csr_matrix((data, (rows, np.arange(rows.size))), shape=(self.n, count))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = check_square(X, self.n)
        out = np.zeros((self.n, self.n))
        if self.g1.m == 0 or self.g2.m == 0:
            return out
        if self.cached:
            blocks = [(slice(0, self.g1.m), self.table())]
        else:
            blocks = self._stream_blocks()
        for rows, T in blocks:
            for i_idx, k_idx in self._orient1:
                i_b, k_b = i_idx[rows], k_idx[rows]
                R1 = self._incidence(i_b, i_b.size)
                for c_idx, a_idx in self._orient2:
                    W = T * X[k_b[:, None], c_idx[None, :]]
                    R2 = self._incidence(a_idx, a_idx.size)
                    out += R1 @ np.asarray(R2 @ W.T).T
        return out

    def _stream_blocks(self):
        for start in range(0, self.g1.m, self._block_rows):
            rows = slice(start, min(start + self._block_rows, self.g1.m))
            yield rows, pairwise_kernel(self.cfg, self.g1.edge_attrs[rows], self.g2.edge_attrs)


def exact_cross_gram(
    g1: AttributedGraph, g2: AttributedGraph, cfg: KernelConfig, X: np.ndarray
) -> np.ndarray:
    """One-shot exact cross gram; build an :class:`ExactCrossGram` to reuse the table."""
    return ExactCrossGram(g1, g2, cfg)(X)


# Hilbert-array algebra on dense (D, n, n) arrays.

def h_transpose(A: np.ndarray) -> np.ndarray:
    return A.transpose(0, 2, 1)


def h_star(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Real matrix ``(A * B)[i, j] = sum_k <A_ik, B_kj>``."""
    return np.einsum("dik,dkj->ij", A, B)


def h_right(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``(A ⊙ X)[i, b] = sum_j A_ij X_jb``."""
    return np.matmul(A, X)


def h_left(X: np.ndarray, A: np.ndarray) -> np.ndarray:
    """``(X ⊙ A)[i, a] = sum_b X_ib A_ba``."""
    return np.matmul(X, A)


def h_inner(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius inner product ``sum_ij <A_ij, B_ij>``."""
    if A.shape != B.shape:
        raise DimensionError(f"Hilbert arrays differ in shape: {A.shape} vs {B.shape}")
    return float(np.vdot(A, B))


def h_norm_sq(A: np.ndarray) -> float:
    return h_inner(A, A)
