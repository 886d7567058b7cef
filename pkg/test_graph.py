"""Tests for the graph model, synthetic pairs, heat attributes and graph files."""

import json

import numpy as np
import pytest

from kergm.core.errors import DimensionError, GraphFormatError
from kergm.core.graph import (
    OUTLIER,
    AttributedGraph,
    GroundTruth,
    SyntheticConfig,
    generate_synthetic_pair,
    heat_diffusion_attrs,
    matching_accuracy,
    normalized_laplacian,
    pad_with_dummy_nodes,
)
from kergm.core.graph_io import load_graph, load_truth, save_graph, save_truth
from kergm.core.oracles import heat_kernel_reference
from kergm.core.utils import derive_seed


def triangle(d_edge: int = 2) -> AttributedGraph:
    attrs = np.arange(3 * d_edge, dtype=float).reshape(3, d_edge) / 10.0
    return AttributedGraph(3, np.array([[0, 1], [1, 2], [0, 2]]), attrs)


def test_edges_are_canonicalized():
    g = AttributedGraph(3, np.array([[2, 1], [1, 0]]), np.array([[0.2], [0.1]]))
    assert g.edges.tolist() == [[0, 1], [1, 2]]
    assert g.edge_attrs[:, 0].tolist() == [0.1, 0.2]
    assert not g.edges.flags.writeable


@pytest.mark.parametrize("edges", [[[0, 3]], [[1, 1]], [[0, 1], [1, 0]]])
def test_invalid_edges_rejected(edges):
    with pytest.raises(DimensionError):
        AttributedGraph(3, np.array(edges), np.ones((len(edges), 1)))


def test_complete_pair_without_noise():
    g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=50, n_out=0, rho=1.0, sigma=0.0, seed=3))
    assert g1.m == g2.m == 50 * 49 // 2
    assert sorted(g1.edge_attrs[:, 0]) == sorted(g2.edge_attrs[:, 0])
    assert truth.inlier_count == 50


def test_zero_noise_pair_is_a_relabeling():
    g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=8, n_out=0, rho=0.6, sigma=0.0, seed=11))
    assert g1.relabeled(truth.mapping) == g2


def test_two_node_pair_copies_attribute():
    g1, g2, _ = generate_synthetic_pair(SyntheticConfig(n_in=2, rho=1.0, sigma=0.0, seed=5))
    assert g1.m == g2.m == 1
    assert g2.edge_attrs[0, 0] == g1.edge_attrs[0, 0]


def test_generation_is_deterministic():
    cfg = SyntheticConfig(n_in=10, n_out=3, rho=0.5, sigma=0.1, seed=42)
    a = generate_synthetic_pair(cfg)
    b = generate_synthetic_pair(cfg)
    assert a[0] == b[0] and a[1] == b[1] and a[2] == b[2]


def test_outliers_in_truth():
    g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=6, n_out=4, rho=0.5, seed=1))
    assert g1.n == g2.n == 10
    assert truth.inlier_count == 6
    assert np.all(truth.mapping[6:] == OUTLIER)
    assert np.unique(truth.mapping[:6]).size == 6


def test_mean_edge_count_matches_density():
    counts = np.array([
        generate_synthetic_pair(SyntheticConfig(n_in=6, rho=0.5, seed=s))[0].m
        for s in range(1000)
    ])
    stderr = np.sqrt(15 * 0.25 / 1000)
    assert abs(counts.mean() - 7.5) < 3 * stderr


def test_padding():
    g1 = AttributedGraph(20, np.array([[0, 1]]), np.ones((1, 1)))
    g2 = AttributedGraph(30, np.array([[0, 1]]), np.ones((1, 1)))
    p1, p2 = pad_with_dummy_nodes(g1, g2)
    assert p1.n == p2.n == 30
    assert p1.m == 1 and p2 is g2
    assert p1.adjacency()[20:].sum() == 0
    same1, same2 = pad_with_dummy_nodes(g1, g1)
    assert same1 is g1 and same2 is g1


def test_laplacian_of_isolated_node_is_identity_row():
    g = AttributedGraph(3, np.array([[0, 1]]), np.ones((1, 1)))
    L = normalized_laplacian(g)
    np.testing.assert_allclose(L[2], [0.0, 0.0, 1.0])
    np.testing.assert_allclose(L[:2, :2], [[1.0, -1.0], [-1.0, 1.0]])


def test_heat_attributes_have_one_column_per_time():
    g = triangle(1)
    h = heat_diffusion_attrs(g, [5, 10, 15, 20])
    assert h.d_edge == 4
    assert h.m == g.m


def test_heat_on_edgeless_graph_is_unchanged():
    g = AttributedGraph(1, np.zeros((0, 2)), np.zeros((0, 1)))
    assert heat_diffusion_attrs(g, [1.0]) is g


def test_heat_matches_matrix_exponential():
    path = AttributedGraph(2, np.array([[0, 1]]), np.ones((1, 1)))
    h = heat_diffusion_attrs(path, [1.0])
    ref = heat_kernel_reference(path, 1.0)
    assert abs(h.edge_attrs[0, 0] - ref[0, 1]) < 1e-12
    assert abs(ref[0, 1] - (1.0 - np.exp(-2.0)) / 2.0) < 1e-12


def test_accuracy():
    truth = GroundTruth(np.array([1, 0, 3, 2]))
    assert matching_accuracy([1, 0, 3, 2], truth) == 1.0
    assert matching_accuracy([0, 1, 2, 3], truth) == 0.0
    assert matching_accuracy([1, 0, 2, 3], truth) == 0.5


def test_accuracy_ignores_outliers_and_dummies():
    truth = GroundTruth(np.array([2, OUTLIER, 0]))
    assert matching_accuracy([2, 0, 0, 1], truth) == 1.0
    assert matching_accuracy([0, 1, 2], GroundTruth(np.array([OUTLIER, OUTLIER]))) == 1.0


def test_truth_rejects_duplicates():
    with pytest.raises(DimensionError):
        GroundTruth(np.array([0, 0, 1]))


def test_triangle_file_round_trip(tmp_path):
    g = triangle(2)
    assert load_graph(save_graph(g, tmp_path / "g.json")) == g


def test_truth_file_round_trip(tmp_path):
    truth = GroundTruth(np.array([3, OUTLIER, 0, 1]))
    assert load_truth(save_truth(truth, tmp_path / "t.json")) == truth


def test_empty_edge_list_is_valid(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"n": 4, "edges": []}))
    g = load_graph(path)
    assert g.n == 4 and g.m == 0


def test_missing_edge_attrs_default_to_one(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"n": 3, "edges": [[0, 1], [1, 2]]}))
    np.testing.assert_array_equal(load_graph(path).edge_attrs, np.ones((2, 1)))


def test_edge_index_out_of_range_names_the_field(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"n": 3, "edges": [[0, 3]], "edge_attrs": [[0.5]]}))
    with pytest.raises(GraphFormatError, match=r"edges\[0\]\[1\]"):
        load_graph(path)


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "g.json"
    path.write_text('{"n": 3,\n "edges": [[0, 1],]}')
    with pytest.raises(GraphFormatError, match="line 2"):
        load_graph(path)


def test_missing_file(tmp_path):
    with pytest.raises(GraphFormatError):
        load_graph(tmp_path / "absent.json")


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(0, 10, 1) == derive_seed(0, 10, 1)
    seeds = {derive_seed(0, p, t) for p in (0, 10, 20) for t in range(5)}
    assert len(seeds) == 15
    assert 0 <= derive_seed(7, 0.04, 0) < 2**63


def test_heat_kernel_is_symmetric_and_bounded():
    g1, _, _ = generate_synthetic_pair(SyntheticConfig(n_in=7, rho=0.5, seed=8))
    ts = [0.5, 2.0, 8.0]
    h = heat_diffusion_attrs(g1, ts)
    assert np.abs(h.edge_attrs).max() <= g1.n
    for t in ts:
        H = heat_kernel_reference(g1, t)
        np.testing.assert_allclose(H, H.T, atol=1e-12)


def test_heat_attributes_follow_relabeling():
    g1, _, _ = generate_synthetic_pair(SyntheticConfig(n_in=6, rho=0.7, seed=9))
    perm = np.array([3, 0, 5, 1, 4, 2])
    relabeled_first = heat_diffusion_attrs(g1.relabeled(perm), [1.0, 3.0])
    heated_first = heat_diffusion_attrs(g1, [1.0, 3.0]).relabeled(perm)
    np.testing.assert_array_equal(relabeled_first.edges, heated_first.edges)
    np.testing.assert_allclose(relabeled_first.edge_attrs, heated_first.edge_attrs, atol=1e-12)
