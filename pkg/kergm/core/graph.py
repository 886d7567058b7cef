"""Attributed graph model, synthetic instances and accuracy scoring."""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from kergm.core.errors import DimensionError
from kergm.core.utils import make_rng

logger = logging.getLogger(__name__)

OUTLIER = -1


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected graph with real attribute vectors on nodes and edges.

    Edges are stored once as ``(i, j)`` with ``i < j``, sorted lexicographically;
    ``edge_attrs[k]`` belongs to ``edges[k]``. Arrays are read-only after construction.
    """

    n: int
    edges: np.ndarray
    edge_attrs: np.ndarray
    node_attrs: Optional[np.ndarray] = None

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise DimensionError(f"node count must be non-negative, got {n}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        m = edges.shape[0]
        attrs = np.asarray(self.edge_attrs, dtype=np.float64)
        if attrs.ndim == 1:
            attrs = attrs.reshape(m, -1) if m else attrs.reshape(0, max(attrs.size, 1))
        if attrs.ndim != 2 or attrs.shape[0] != m:
            raise DimensionError(f"edge_attrs must have {m} rows, got shape {attrs.shape}")
        if m:
            if edges.min() < 0 or edges.max() >= n:
                raise DimensionError(f"edge endpoint outside [0, {n})")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise DimensionError("self-loops are not allowed")
            edges = np.sort(edges, axis=1)
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges = edges[order]
            attrs = attrs[order]
            if np.any(np.all(edges[1:] == edges[:-1], axis=1)):
                raise DimensionError("repeated edge")
        node_attrs = self.node_attrs
        if node_attrs is not None:
            node_attrs = np.asarray(node_attrs, dtype=np.float64)
            if node_attrs.ndim == 1:
                node_attrs = node_attrs.reshape(n, -1)
            if node_attrs.shape[0] != n:
                raise DimensionError(f"node_attrs must have {n} rows, got shape {node_attrs.shape}")
            node_attrs = _frozen(node_attrs.copy())
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", _frozen(edges.copy()))
        object.__setattr__(self, "edge_attrs", _frozen(attrs.copy()))
        object.__setattr__(self, "node_attrs", node_attrs)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @property
    def d_edge(self) -> int:
        return int(self.edge_attrs.shape[1])

    @property
    def d_node(self) -> int:
        return 0 if self.node_attrs is None else int(self.node_attrs.shape[1])

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix."""
        A = np.zeros((self.n, self.n))
        A[self.edges[:, 0], self.edges[:, 1]] = 1.0
        A[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return A

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Both orientations of every edge.

        Returns:
            (src, dst, attrs) with 2m entries; entries k and k + m are the two
            orientations of edge k and share its attribute vector.
        """
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        return src, dst, np.concatenate([self.edge_attrs, self.edge_attrs])

    def relabeled(self, perm: Sequence[int]) -> "AttributedGraph":
        """Graph with node i renamed to perm[i]."""
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (self.n,):
            raise DimensionError(f"permutation must have length {self.n}")
        node_attrs = None
        if self.node_attrs is not None:
            node_attrs = np.zeros_like(self.node_attrs)
            node_attrs[perm] = self.node_attrs
        return AttributedGraph(self.n, perm[self.edges], self.edge_attrs, node_attrs)

    def with_edge_attrs(self, edge_attrs: np.ndarray) -> "AttributedGraph":
        return AttributedGraph(self.n, self.edges, edge_attrs, self.node_attrs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        if self.n != other.n or self.edges.shape != other.edges.shape:
            return False
        if self.edge_attrs.shape != other.edge_attrs.shape:
            return False
        if (self.node_attrs is None) != (other.node_attrs is None):
            return False
        if self.node_attrs is not None and not np.array_equal(self.node_attrs, other.node_attrs):
            return False
        return bool(np.array_equal(self.edges, other.edges)
                    and np.array_equal(self.edge_attrs, other.edge_attrs))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """For each node of graph 1, its partner in graph 2 or OUTLIER (-1)."""

    mapping: np.ndarray
    inlier_count: int = field(default=-1)

    def __post_init__(self):
        mapping = np.asarray(self.mapping, dtype=np.int64).reshape(-1)
        inliers = mapping[mapping != OUTLIER]
        if np.any(inliers < 0):
            raise DimensionError("ground-truth entries must be >= 0 or the sentinel -1")
        if np.unique(inliers).size != inliers.size:
            raise DimensionError("ground-truth inlier entries must be distinct")
        count = int(self.inlier_count)
        if count < 0:
            count = int(inliers.size)
        if count != inliers.size:
            raise DimensionError(
                f"inlier_count={count} but mapping has {inliers.size} non-sentinel entries"
            )
        object.__setattr__(self, "mapping", _frozen(mapping.copy()))
        object.__setattr__(self, "inlier_count", count)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return self.inlier_count == other.inlier_count and np.array_equal(self.mapping, other.mapping)

    __hash__ = None  # type: ignore[assignment]


class SyntheticConfig(BaseModel):
    """Erdős–Rényi pair protocol parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_in: int = Field(default=50, ge=0)
    n_out: int = Field(default=0, ge=0)
    rho: float = Field(default=1.0, ge=0.0, le=1.0)
    sigma: float = Field(default=0.0, ge=0.0)
    seed: int = Field(default=0, ge=0)


def generate_synthetic_pair(
    cfg: SyntheticConfig,
) -> tuple[AttributedGraph, AttributedGraph, GroundTruth]:
    """Generate a reference graph, its perturbed copy and the ground truth.

    Graph 1 has nodes ``0..n_in-1`` as inliers followed by ``n_out`` outliers. Inlier
    ``i`` sits at node ``p[i]`` of graph 2 for a uniformly drawn permutation ``p``;
    the remaining nodes of graph 2 are its outliers. Every node pair of graph 1 is
    an edge with probability ``rho`` and attribute ``U[0, 1]``. Graph 2 copies the
    inlier-inlier edges with attribute noise ``N(0, sigma^2)`` and wires its own
    outliers independently with the same density.
    """
    rng = make_rng(cfg.seed)
    n_in, n = cfg.n_in, cfg.n_in + cfg.n_out
    p = rng.permutation(n)

    rows, cols = np.triu_indices(n, 1)
    keep1 = rng.random(rows.size) < cfg.rho
    q1 = rng.random(rows.size)
    edges1 = np.stack([rows[keep1], cols[keep1]], axis=1)
    attrs1 = q1[keep1]
    g1 = AttributedGraph(n, edges1, attrs1.reshape(-1, 1))

    inner = (edges1[:, 0] < n_in) & (edges1[:, 1] < n_in)
    noise = cfg.sigma * rng.standard_normal(int(inner.sum()))
    copied_edges = p[edges1[inner]]
    copied_attrs = attrs1[inner] + noise

    is_outlier2 = np.zeros(n, dtype=bool)
    is_outlier2[p[n_in:]] = True
    touches_outlier = is_outlier2[rows] | is_outlier2[cols]
    keep2 = rng.random(rows.size) < cfg.rho
    q2 = rng.random(rows.size)
    fresh = touches_outlier & keep2
    edges2 = np.concatenate([copied_edges, np.stack([rows[fresh], cols[fresh]], axis=1)])
    attrs2 = np.concatenate([copied_attrs, q2[fresh]])
    g2 = AttributedGraph(n, edges2, attrs2.reshape(-1, 1))

    mapping = np.full(n, OUTLIER, dtype=np.int64)
    mapping[:n_in] = p[:n_in]
    truth = GroundTruth(mapping, n_in)
    logger.debug("synthetic pair seed=%d n=%d m1=%d m2=%d", cfg.seed, n, g1.m, g2.m)
    return g1, g2, truth


def pad_with_dummy_nodes(
    g1: AttributedGraph, g2: AttributedGraph
) -> tuple[AttributedGraph, AttributedGraph]:
    """Append isolated, zero-attributed dummy nodes so both graphs have max(n1, n2) nodes."""
    n = max(g1.n, g2.n)

    def pad(g: AttributedGraph) -> AttributedGraph:
        if g.n == n:
            return g
        node_attrs = None
        if g.node_attrs is not None:
            node_attrs = np.vstack([g.node_attrs, np.zeros((n - g.n, g.d_node))])
        return AttributedGraph(n, g.edges, g.edge_attrs, node_attrs)

    return pad(g1), pad(g2)


def normalized_laplacian(g: AttributedGraph) -> np.ndarray:
    """L = I - D^{-1/2} A D^{-1/2}, with D^{-1/2} set to 0 on isolated nodes."""
    A = g.adjacency()
    deg = A.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    return np.eye(g.n) - inv_sqrt[:, None] * A * inv_sqrt[None, :]


def heat_diffusion_attrs(g: AttributedGraph, t_list: Sequence[float]) -> AttributedGraph:
    """Replace edge attributes with heat-kernel values ``[H_t(i, j) for t in t_list]``.

    ``H_t = exp(-t L)`` is evaluated from the eigendecomposition of the normalized
    Laplacian. Graphs without edges are returned unchanged.
    """
    ts = np.asarray(list(t_list), dtype=np.float64)
    if ts.size == 0 or np.any(ts <= 0):
        raise DimensionError("t_list must be non-empty with positive entries")
    if g.m == 0:
        return g
    eigvals, eigvecs = scipy.linalg.eigh(normalized_laplacian(g))
    i, j = g.edges[:, 0], g.edges[:, 1]
    attrs = np.empty((g.m, ts.size))
    for k, t in enumerate(ts):
        heat = (eigvecs * np.exp(-eigvals * t)) @ eigvecs.T
        attrs[:, k] = heat[i, j]
    return g.with_edge_attrs(attrs)


def matching_accuracy(perm: Sequence[int], truth: GroundTruth) -> float:
    """Fraction of inlier nodes whose assigned partner equals the ground truth."""
    perm = np.asarray(perm, dtype=np.int64).reshape(-1)
    mapping = truth.mapping
    if perm.size < mapping.size:
        raise DimensionError(
            f"permutation has {perm.size} entries, ground truth needs {mapping.size}"
        )
    if truth.inlier_count == 0:
        return 1.0
    inliers = mapping != OUTLIER
    correct = int(np.count_nonzero(perm[: mapping.size][inliers] == mapping[inliers]))
    return correct / truth.inlier_count
