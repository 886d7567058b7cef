"""JSON graph and ground-truth files."""

import json
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from kergm.core.errors import GraphFormatError
from kergm.core.graph import OUTLIER, AttributedGraph, GroundTruth


class GraphDocument(BaseModel):
    """On-disk schema of a graph file; indices are 0-based, edges stored once with i < j."""

    model_config = ConfigDict(extra="forbid")

    n: int
    node_attrs: Optional[list[list[float]]] = None
    edges: list[tuple[int, int]]
    edge_attrs: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def _check_indices(self) -> "GraphDocument":
        if self.n < 0:
            raise ValueError(f"n: must be non-negative, got {self.n}")
        seen: set[tuple[int, int]] = set()
        for k, (i, j) in enumerate(self.edges):
            for pos, idx in enumerate((i, j)):
                if not 0 <= idx < self.n:
                    raise ValueError(f"edges[{k}][{pos}]: index {idx} outside [0, {self.n})")
            if i == j:
                raise ValueError(f"edges[{k}]: self-loop on node {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"edges[{k}]: repeated edge {key}")
            seen.add(key)
        if self.edge_attrs is not None:
            if len(self.edge_attrs) != len(self.edges):
                raise ValueError(
                    f"edge_attrs: {len(self.edge_attrs)} rows for {len(self.edges)} edges"
                )
            widths = {len(row) for row in self.edge_attrs}
            if len(widths) > 1:
                raise ValueError(f"edge_attrs: rows have differing lengths {sorted(widths)}")
        if self.node_attrs is not None:
            if len(self.node_attrs) != self.n:
                raise ValueError(f"node_attrs: {len(self.node_attrs)} rows for n={self.n}")
            widths = {len(row) for row in self.node_attrs}
            if len(widths) > 1:
                raise ValueError(f"node_attrs: rows have differing lengths {sorted(widths)}")
        return self


class TruthDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mapping: list[int]
    inlier_count: int

    @model_validator(mode="after")
    def _check_mapping(self) -> "TruthDocument":
        inliers = [v for v in self.mapping if v != OUTLIER]
        for k, v in enumerate(self.mapping):
            if v < OUTLIER:
                raise ValueError(f"mapping[{k}]: {v} is neither an index nor the sentinel -1")
        if len(set(inliers)) != len(inliers):
            raise ValueError("mapping: inlier entries are not distinct")
        if len(inliers) != self.inlier_count:
            raise ValueError(
                f"inlier_count: {self.inlier_count} but mapping has {len(inliers)} inliers"
            )
        return self


def _read_json(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise GraphFormatError(f"{path}: cannot read file: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise GraphFormatError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e


def _describe(path: Path, error: ValidationError) -> str:
    parts = []
    for err in error.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return f"{path}: " + "; ".join(parts)


def graph_to_dict(g: AttributedGraph) -> dict[str, Any]:
    return {
        "n": g.n,
        "node_attrs": None if g.node_attrs is None else g.node_attrs.tolist(),
        "edges": g.edges.tolist(),
        "edge_attrs": g.edge_attrs.tolist(),
    }


def graph_from_dict(data: Any, source: str = "<memory>") -> AttributedGraph:
    """Validate a decoded JSON document and build the graph.

    Missing ``edge_attrs`` give every edge the constant attribute 1.0.
    """
    path = Path(source)
    try:
        doc = GraphDocument.model_validate(data)
    except ValidationError as e:
        raise GraphFormatError(_describe(path, e)) from e
    m = len(doc.edges)
    if doc.edge_attrs is None:
        edge_attrs = np.ones((m, 1))
    else:
        width = len(doc.edge_attrs[0]) if m else 1
        edge_attrs = np.asarray(doc.edge_attrs, dtype=np.float64).reshape(m, width)
    node_attrs = None
    if doc.node_attrs is not None:
        width = len(doc.node_attrs[0]) if doc.n else 0
        node_attrs = np.asarray(doc.node_attrs, dtype=np.float64).reshape(doc.n, width)
    edges = np.asarray(doc.edges, dtype=np.int64).reshape(m, 2)
    return AttributedGraph(doc.n, edges, edge_attrs, node_attrs)


def load_graph(path: str | Path) -> AttributedGraph:
    path = Path(path)
    return graph_from_dict(_read_json(path), str(path))


def save_graph(g: AttributedGraph, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(graph_to_dict(g)), encoding="utf-8")
    return path


def load_truth(path: str | Path) -> GroundTruth:
    path = Path(path)
    try:
        doc = TruthDocument.model_validate(_read_json(path))
    except ValidationError as e:
        raise GraphFormatError(_describe(path, e)) from e
    return GroundTruth(np.asarray(doc.mapping, dtype=np.int64), doc.inlier_count)


def save_truth(truth: GroundTruth, path: str | Path) -> Path:
    path = Path(path)
    doc = {"mapping": truth.mapping.tolist(), "inlier_count": truth.inlier_count}
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path
