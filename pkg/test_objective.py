"""Tests for the kernelized QAP objective, its relaxations and the brute-force oracles."""

import numpy as np
import pytest

from kergm.core.enfw import quad_coeff
from kergm.core.errors import CapExceededError, ConfigError, DomainError
from kergm.core.graph import AttributedGraph, SyntheticConfig, generate_synthetic_pair
from kergm.core.kernels import KernelConfig
from kergm.core.objective import (
    brute_force_qap,
    entropy,
    f_alpha,
    grad_j_alpha,
    j_alpha,
    j_aux,
    j_cav,
    j_vex,
    lawler_affinity_oracle,
    objective_gm,
    prepare_instance,
    quadratic_term,
)
from kergm.core.oracles import finite_difference_gradient, random_coupling, random_graph
from kergm.core.utils import make_rng, permutation_matrix

GAUSS = KernelConfig("gaussian_sq", gamma=5.0)
LINEAR = KernelConfig("linear")


def attributed_pair(n: int, seed: int):
    rng = make_rng(seed)
    g1, g2 = random_graph(n, 0.6, 2, rng), random_graph(n, 0.6, 2, rng)
    g1 = AttributedGraph(g1.n, g1.edges, g1.edge_attrs, rng.random((n, 1)))
    g2 = AttributedGraph(g2.n, g2.edges, g2.edge_attrs, rng.random((n, 1)))
    return g1, g2, rng


@pytest.fixture
def instance():
    g1, g2, rng = attributed_pair(5, 21)
    inst = prepare_instance(g1, g2, GAUSS, node_kernel=KernelConfig("gaussian_abs"), backend="exact")
    return inst, rng


def test_self_alignment():
    g = random_graph(6, 0.7, 2, make_rng(4))
    inst = prepare_instance(g, g, GAUSS, backend="exact")
    assert objective_gm(inst, np.eye(6)) == pytest.approx(-np.trace(inst.s1), rel=1e-12)
    assert objective_gm(inst, np.zeros((6, 6))) == 0.0


def test_objective_matches_affinity_matrix(instance):
    inst, rng = instance
    K = lawler_affinity_oracle(inst.g1, inst.g2, GAUSS)
    for _ in range(20):
        X = permutation_matrix(rng.permutation(5)) if rng.random() < 0.5 else random_coupling(5, rng)
        x = X.ravel(order="F")
        expected = -float(np.vdot(inst.kn_raw, X)) - float(x @ K @ x)
        assert objective_gm(inst, X) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_koopmans_beckmann_reduction():
    rng = make_rng(2)
    g1, g2 = random_graph(4, 0.6, 1, rng), random_graph(4, 0.6, 1, rng)
    g1, g2 = g1.with_edge_attrs(np.ones((g1.m, 1))), g2.with_edge_attrs(np.ones((g2.m, 1)))
    K = lawler_affinity_oracle(g1, g2, LINEAR)
    np.testing.assert_array_equal(K, np.kron(g2.adjacency(), g1.adjacency()))


def test_affinity_of_edgeless_graphs_is_zero():
    g = AttributedGraph(3, np.zeros((0, 2)), np.zeros((0, 1)))
    assert not lawler_affinity_oracle(g, g, GAUSS).any()


def test_affinity_oracle_cap():
    g = AttributedGraph(31, np.array([[0, 1]]), np.ones((1, 1)))
    with pytest.raises(CapExceededError):
        lawler_affinity_oracle(g, g, GAUSS)


def test_j_aux_is_constant_on_permutations(instance):
    inst, rng = instance
    for _ in range(20):
        P = permutation_matrix(rng.permutation(5))
        assert j_aux(inst, P) == pytest.approx(inst.c_aux, rel=1e-12)
    assert j_aux(inst, np.zeros((5, 5))) == 0.0


def test_j_aux_matches_slicewise_norms():
    rng = make_rng(13)
    g1, g2 = random_graph(6, 0.6, 1, rng), random_graph(6, 0.6, 1, rng)
    inst = prepare_instance(g1, g2, GAUSS, backend="rff", dim=7, seed=3)
    X = random_coupling(6, rng)
    A1, A2 = inst.backend.psi1.dense, inst.backend.psi2.dense
    expected = 0.5 * sum(np.sum((A1[d] @ X) ** 2) + np.sum((X @ A2[d]) ** 2) for d in range(7))
    assert j_aux(inst, X) == pytest.approx(expected, rel=1e-12)


def test_relaxations_agree_on_permutations(instance):
    inst, rng = instance
    P = permutation_matrix(rng.permutation(5))
    J = objective_gm(inst, P)
    assert j_vex(inst, P) == pytest.approx(J + inst.c_aux, rel=1e-12)
    assert j_cav(inst, P) == pytest.approx(J - inst.c_aux, rel=1e-12)
    assert j_alpha(inst, P, 0.5) == pytest.approx(J, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
def test_gradient_matches_finite_differences(instance, alpha):
    inst, rng = instance
    X = random_coupling(5, rng)
    numeric = finite_difference_gradient(lambda Z: j_alpha(inst, Z, alpha), X)
    np.testing.assert_allclose(grad_j_alpha(inst, X, alpha), numeric, rtol=1e-6, atol=1e-8)
    numeric_n = finite_difference_gradient(lambda Z: j_alpha(inst, Z, alpha, normalized=True), X)
    np.testing.assert_allclose(grad_j_alpha(inst, X, alpha, normalized=True), numeric_n,
                               rtol=1e-6, atol=1e-8)


def test_midpoint_gradient_drops_auxiliary_term(instance):
    inst, rng = instance
    X = random_coupling(5, rng)
    expected = -2.0 * inst.backend.cross(X) - inst.kn_raw
    np.testing.assert_allclose(grad_j_alpha(inst, X, 0.5), expected, rtol=1e-14, atol=1e-14)


def test_linear_kernel_backends_agree():
    rng = make_rng(17)
    g1, g2 = random_graph(6, 0.5, 3, rng), random_graph(6, 0.5, 3, rng)
    exact = prepare_instance(g1, g2, LINEAR, backend="exact")
    feat = prepare_instance(g1, g2, LINEAR, backend="rff")
    X = random_coupling(6, rng)
    np.testing.assert_allclose(exact.s1, feat.s1, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(grad_j_alpha(exact, X, 0.2), grad_j_alpha(feat, X, 0.2), rtol=1e-10, atol=1e-12)


def test_rff_backend_rejects_absolute_kernel():
    g = random_graph(4, 0.5, 1, make_rng(0))
    with pytest.raises(ConfigError):
        prepare_instance(g, g, KernelConfig("gaussian_abs"), backend="rff")


def test_unequal_sizes_are_padded():
    rng = make_rng(1)
    inst = prepare_instance(random_graph(4, 0.5, 1, rng), random_graph(6, 0.5, 1, rng), GAUSS, backend="exact")
    assert inst.n == 6 and inst.s1.shape == (6, 6)


def test_entropy_closed_forms():
    n = 5
    assert entropy(np.full((n, n), 1.0 / n**2)) == pytest.approx(-2.0 * np.log(n), rel=1e-14)
    assert entropy(permutation_matrix(np.array([2, 0, 4, 1, 3])) / n) == pytest.approx(-np.log(n), rel=1e-14)
    with pytest.raises(DomainError):
        entropy(-np.eye(2))


def test_f_alpha_without_entropy(instance):
    inst, rng = instance
    X = random_coupling(5, rng)
    assert f_alpha(inst, X, 0.4, 0.0) == pytest.approx(j_alpha(inst, X, 0.4, normalized=True), rel=1e-14)


def test_quadratic_coefficient_taylor_identity(instance):
    inst, rng = instance
    X, Y = random_coupling(5, rng), random_coupling(5, rng)
    s, alpha = 0.37, 0.8
    D = Y - X
    Q = quad_coeff(inst, X, Y, alpha)
    lhs = j_alpha(inst, X + s * D, alpha)
    rhs = j_alpha(inst, X, alpha) + s * float(np.vdot(grad_j_alpha(inst, X, alpha), D)) + s**2 * Q
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
    assert quad_coeff(inst, X, X, alpha) == 0.0


def test_convex_relaxation_has_nonnegative_curvature(instance):
    inst, rng = instance
    for _ in range(10):
        X, Y = random_coupling(5, rng), random_coupling(5, rng)
        assert quad_coeff(inst, X, Y, 0.0) >= -1e-12


def test_quadratic_term_is_symmetric_in_graphs():
    rng = make_rng(9)
    g1, g2 = random_graph(5, 0.6, 1, rng), random_graph(5, 0.6, 1, rng)
    X = random_coupling(5, rng)
    a = quadratic_term(prepare_instance(g1, g2, GAUSS, backend="exact"), X)
    b = quadratic_term(prepare_instance(g2, g1, GAUSS, backend="exact"), X.T)
    assert a == pytest.approx(b, rel=1e-12)


def test_brute_force_recovers_identity():
    rng = make_rng(30)
    n = 5
    rows, cols = np.triu_indices(n, 1)
    g = AttributedGraph(n, np.stack([rows, cols], axis=1), rng.random((rows.size, 2)))
    inst = prepare_instance(g, g, GAUSS, backend="exact")
    perm, value = brute_force_qap(inst)
    assert perm.tolist() == list(range(n))
    assert value == pytest.approx(-2.0 * g.m, rel=1e-12)


def test_brute_force_trivial_sizes():
    g = AttributedGraph(1, np.zeros((0, 2)), np.zeros((0, 1)))
    perm, value = brute_force_qap(prepare_instance(g, g, GAUSS, backend="exact"))
    assert perm.tolist() == [0] and value == 0.0


def test_brute_force_optimum_at_ground_truth():
    g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=6, rho=0.6, sigma=0.0, seed=8))
    inst = prepare_instance(g1, g2, GAUSS, backend="exact")
    _, value = brute_force_qap(inst)
    assert value == pytest.approx(objective_gm(inst, permutation_matrix(truth.mapping)), rel=1e-12)
    assert value == pytest.approx(-2.0 * g1.m, rel=1e-12)


def test_brute_force_cap():
    g = AttributedGraph(11, np.zeros((0, 2)), np.zeros((0, 1)))
    with pytest.raises(CapExceededError):
        brute_force_qap(prepare_instance(g, g, GAUSS, backend="exact"))


@pytest.mark.parametrize("alpha", [0.0, 0.6, 1.0])
def test_random_feature_gradient_matches_finite_differences(alpha):
    g1, g2, rng = attributed_pair(5, 40)
    inst = prepare_instance(g1, g2, GAUSS, backend="rff", dim=30, seed=2)
    X = random_coupling(5, rng)
    numeric = finite_difference_gradient(lambda Z: j_alpha(inst, Z, alpha), X)
    np.testing.assert_allclose(grad_j_alpha(inst, X, alpha), numeric, rtol=1e-6, atol=1e-8)


def test_concave_relaxation_has_nonpositive_curvature(instance):
    inst, rng = instance
    for _ in range(10):
        X, Y = random_coupling(5, rng), random_coupling(5, rng)
        assert quad_coeff(inst, X, Y, 1.0) <= 1e-12
        s = float(rng.random())
        mid = j_cav(inst, (1.0 - s) * X + s * Y)
        assert mid >= (1.0 - s) * j_cav(inst, X) + s * j_cav(inst, Y) - 1e-12


def test_convex_relaxation_is_bounded_by_node_term(instance):
    inst, rng = instance
    for _ in range(10):
        X = random_coupling(5, rng)
        assert j_vex(inst, X) >= -float(np.vdot(inst.kn_raw, X)) - 1e-12
