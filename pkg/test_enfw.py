"""Tests for Sinkhorn, entropic Frank-Wolfe, path following, discretization and matching."""

import numpy as np
import pytest

from kergm.core.assignment import discretize_solution, greedy_discretize, hungarian
from kergm.core.enfw import (
    DEFAULT_GRID,
    EnfwReport,
    IterationRecord,
    PathParams,
    StopCriteria,
    enfw_minimize,
    gap,
    parse_alpha_grid,
    path_follow,
    stepsize,
)
from kergm.core.errors import ConfigError, DomainError, SinkhornError
from kergm.core.graph import AttributedGraph, SyntheticConfig, generate_synthetic_pair, matching_accuracy
from kergm.core.kernels import KernelConfig
from kergm.core.matcher import SolverSettings, build_settings, match_graphs
from kergm.core.objective import brute_force_qap, f_alpha, grad_j_alpha, j_alpha, prepare_instance
from kergm.core.oracles import (
    brute_force_assignment,
    convex_reference_optimum,
    entropic_direction_reference,
    entropic_objective,
    hungarian_frank_wolfe,
    random_coupling,
    random_graph,
)
from kergm.core.sinkhorn import (
    SinkhornConfig,
    anneal_schedule,
    marginal_error,
    sinkhorn_direction,
    sinkhorn_solve,
)
from kergm.core.utils import make_rng, permutation_matrix

GAUSS = KernelConfig("gaussian_sq", gamma=5.0)


def small_instance(n: int = 5, seed: int = 0):
    rng = make_rng(seed)
    g1, g2 = random_graph(n, 0.6, 1, rng), random_graph(n, 0.6, 1, rng)
    return prepare_instance(g1, g2, GAUSS, backend="exact")


def complete_graph(n: int, seed: int) -> AttributedGraph:
    rows, cols = np.triu_indices(n, 1)
    return AttributedGraph(n, np.stack([rows, cols], axis=1), make_rng(seed).random((rows.size, 1)))


# Sinkhorn

def test_zero_cost_gives_uniform_plan():
    Y = sinkhorn_direction(np.zeros((4, 4)), SinkhornConfig(lam=0.1))
    np.testing.assert_allclose(Y, np.full((4, 4), 1.0 / 16), atol=1e-15)


def test_small_lambda_concentrates_on_dominant_permutation():
    P = permutation_matrix(np.array([2, 0, 3, 1]))
    Y = sinkhorn_direction(1.0 - P, SinkhornConfig(lam=1e-3))
    np.testing.assert_allclose(Y, P / 4, atol=1e-6)


@pytest.mark.parametrize("lam", [0.005, 0.05, 0.1, 1.0])
def test_sinkhorn_matches_dual_reference(lam):
    C = make_rng(3).random((6, 6))
    result = sinkhorn_solve(C, SinkhornConfig(lam=lam, tol=1e-11))
    _, ref = entropic_direction_reference(C, lam)
    assert entropic_objective(C, result.plan, lam) == pytest.approx(ref, abs=1e-6)
    assert marginal_error(result.plan) <= 1e-10


def test_anneal_schedule_starts_above_cost_range():
    assert anneal_schedule(1.0, 0.005) == pytest.approx([5.0, 0.5, 0.05])
    assert anneal_schedule(0.01, 0.005) == pytest.approx([0.05])
    assert anneal_schedule(0.0, 0.1) == []


@pytest.mark.parametrize("anneal,newton", [(True, True), (False, True)])
def test_small_lambda_converges_at_default_budget(anneal, newton):
    C = make_rng(8).random((8, 8))
    cfg = SinkhornConfig(anneal=anneal, newton=newton)
    result = sinkhorn_solve(C, cfg)
    assert result.marginal_error <= cfg.tol
    assert result.iterations <= cfg.max_iters
    reference = sinkhorn_solve(C, SinkhornConfig(tol=1e-12))
    np.testing.assert_allclose(result.plan, reference.plan, atol=1e-8)


def test_newton_polish_takes_over_from_sweeps():
    C = make_rng(9).random((6, 6))
    result = sinkhorn_solve(C, SinkhornConfig(tol=1e-13, newton_after=0))
    assert result.newton_steps > 0
    assert result.marginal_error <= 1e-13
    assert result.seconds > 0.0

def test_sinkhorn_is_shift_invariant():
    C = make_rng(4).random((5, 5))
    cfg = SinkhornConfig(lam=0.1, tol=1e-13)
    np.testing.assert_allclose(sinkhorn_direction(C + 3.7, cfg), sinkhorn_direction(C, cfg), atol=1e-12)


def test_plain_and_log_domain_agree():
    C = make_rng(5).random((5, 5))
    log = sinkhorn_direction(C, SinkhornConfig(lam=0.5, tol=1e-13))
    plain = sinkhorn_direction(C, SinkhornConfig(lam=0.5, tol=1e-13, log_domain=False))
    np.testing.assert_allclose(plain, log, atol=1e-12)


def test_warm_start_reuses_potentials():
    C = make_rng(6).random((6, 6))
    cfg = SinkhornConfig(lam=0.05, tol=1e-10)
    cold = sinkhorn_solve(C, cfg)
    warm = sinkhorn_solve(C, cfg, (cold.u, cold.v))
    assert warm.iterations < cold.iterations
    np.testing.assert_allclose(warm.plan, cold.plan, atol=1e-9)


def test_non_convergence_carries_best_iterate():
    C = make_rng(7).random((5, 5))
    with pytest.raises(SinkhornError) as info:
        sinkhorn_solve(C, SinkhornConfig(lam=0.01, tol=1e-15, max_iters=3))
    assert info.value.best is not None and info.value.best.shape == (5, 5)
    assert info.value.marginal_error > 1e-15
    assert info.value.exit_code == 3


def test_plain_domain_underflow_is_reported():
    with pytest.raises(SinkhornError, match="log_domain"):
        sinkhorn_solve(np.array([[0.0, 1.0], [1000.0, 1000.0]]),
                       SinkhornConfig(lam=0.01, log_domain=False))


def test_non_finite_cost_rejected():
    with pytest.raises(SinkhornError):
        sinkhorn_solve(np.array([[0.0, np.inf], [1.0, 0.0]]), SinkhornConfig())


# Gap and stepsize

def test_gap_is_zero_at_its_own_direction():
    inst = small_instance()
    X = random_coupling(5, make_rng(1))
    assert gap(inst, X, 0.3, 0.05, X) == 0.0


@pytest.mark.parametrize("G,Q,expected", [(3.0, -1.0, 1.0), (0.4, 1.0, 0.2), (10.0, 1.0, 1.0), (0.0, 0.0, 1.0)])
def test_stepsize(G, Q, expected):
    assert stepsize(G, Q) == pytest.approx(expected)


def test_stepsize_rejects_negative_gap():
    with pytest.raises(DomainError):
        stepsize(-0.1, 1.0)


# EnFW and the path

def test_stationary_start_returns_immediately():
    g = AttributedGraph(4, np.zeros((0, 2)), np.zeros((0, 1)))
    inst = prepare_instance(g, g, GAUSS, backend="exact")
    X0 = np.full((4, 4), 1.0 / 16)
    X, report = enfw_minimize(inst, 0.0, 0.05, X0)
    np.testing.assert_array_equal(X, X0)
    assert report.status == "gap_converged"
    assert report.iterations == 0 and len(report.records) == 1


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
def test_objective_never_increases(alpha):
    inst = small_instance(6, seed=2)
    _, report = enfw_minimize(inst, alpha, 0.05, stop=StopCriteria(max_outer=60))
    trace = np.asarray(report.f_trace)
    assert np.all(np.diff(trace) <= 1e-12 * (1.0 + np.abs(trace[:-1])))


def test_descent_and_gap_sign_over_random_instances():
    sharp = SinkhornConfig(tol=1e-14)
    for seed in range(20):
        inst = small_instance(4 + seed % 4, seed=100 + seed)
        for alpha in (0.0, 0.5, 1.0):
            _, report = enfw_minimize(inst, alpha, 0.005, stop=StopCriteria(max_outer=40),
                                      sinkhorn=sharp)
            assert np.diff(report.f_trace).max(initial=0.0) <= 1e-12, (seed, alpha)
            assert min(report.gaps) >= -1e-12, (seed, alpha)


def test_final_record_without_direction_has_no_gap():
    report = EnfwReport(alpha=0.5, lam=0.05, status="stalled")
    report.records = [
        IterationRecord(0, 1.0, 0.3, 0.1, 1e-13, 12, 0.0, 0.01),
        IterationRecord(1, 0.9, 0.2, 0.1, 1e-13, 8, 0.0, 0.01),
        IterationRecord(2, 0.8, None, None, None, 0, 0.0, 0.0),
    ]
    assert report.gaps == [0.3, 0.2]
    assert report.iterations == 2
    payload = report.to_dict()
    assert payload["final_f"] == 0.8 and payload["final_gap"] == 0.2
    assert payload["records"][-1]["gap"] is None


def test_hungarian_frank_wolfe_agrees_with_small_lambda_enfw():
    inst = small_instance(5, seed=6)
    lam = 1e-3
    X_en, _ = enfw_minimize(inst, 0.0, lam, stop=StopCriteria(gap_tol=1e-10, max_outer=3000),
                            sinkhorn=SinkhornConfig(tol=1e-12))
    grad = grad_j_alpha(inst, X_en, 0.0, normalized=True)
    Y = sinkhorn_solve(grad, SinkhornConfig(lam=lam, tol=1e-12)).plan
    G_en = max(gap(inst, X_en, 0.0, lam, Y), 0.0)
    X_fw, G_fw, steps = hungarian_frank_wolfe(inst, 0.0, max_outer=2000)
    assert G_fw >= 0.0 and steps <= 2000
    assert marginal_error(X_fw) < 1e-12
    spread = abs(j_alpha(inst, X_en, 0.0, normalized=True) - j_alpha(inst, X_fw, 0.0, normalized=True))
    assert spread <= lam * np.log(5) + G_en + G_fw + 1e-9


def test_hungarian_frank_wolfe_decreases_objective():
    inst = small_instance(6, seed=7)
    start = np.full((6, 6), 1.0 / 36)
    X, _, _ = hungarian_frank_wolfe(inst, 0.5, max_outer=50)
    assert j_alpha(inst, X, 0.5, normalized=True) <= j_alpha(inst, start, 0.5, normalized=True)


def test_convex_stage_reaches_reference_optimum():
    inst = small_instance(4, seed=3)
    lam = 0.05
    _, F_ref = convex_reference_optimum(inst, 0.0, lam)
    X, report = enfw_minimize(inst, 0.0, lam, stop=StopCriteria(gap_tol=1e-9, max_outer=5000),
                              sinkhorn=SinkhornConfig(lam=lam, tol=1e-12))
    assert abs(f_alpha(inst, X, 0.0, lam) - F_ref) < 1e-5
    assert report.records[-1].gap <= 1e-9 or report.status == "max_iters"


def test_iterates_stay_in_scaled_birkhoff_polytope():
    inst = small_instance(5, seed=4)
    X, _ = path_follow(inst, PathParams(alpha_grid=(0.0, 0.5, 1.0), lam=0.05),
                       stop=StopCriteria(max_outer=50))
    assert X.min() >= 0.0
    assert marginal_error(X) < 1e-7


def test_path_runs_once_per_alpha():
    inst = small_instance(3, seed=5)
    _, reports = path_follow(inst, PathParams(alpha_grid=parse_alpha_grid("0:0.1:1"), lam=0.05),
                             stop=StopCriteria(max_outer=5))
    assert [r.alpha for r in reports] == list(DEFAULT_GRID)


def test_single_node_path():
    g = AttributedGraph(1, np.zeros((0, 2)), np.zeros((0, 1)))
    X, reports = path_follow(prepare_instance(g, g, GAUSS, backend="exact"), PathParams())
    np.testing.assert_allclose(X, [[1.0]])
    assert len(reports) == 11


def test_alpha_grid_parsing():
    assert parse_alpha_grid("0:0.1:1") == DEFAULT_GRID
    assert parse_alpha_grid("0, 0.5, 1") == (0.0, 0.5, 1.0)
    with pytest.raises(ConfigError):
        parse_alpha_grid("0:x:1")
    with pytest.raises(ValueError):
        PathParams(alpha_grid=(0.0, 0.7, 0.5, 1.0))
    with pytest.raises(ValueError):
        PathParams(alpha_grid=(0.1, 1.0))


# Discretization

def test_hungarian_small_cost():
    cost = np.array([[1.0, 2.0], [2.0, 1.0]])
    perm = hungarian(cost)
    assert perm.tolist() == [0, 1]
    assert cost[[0, 1], perm].sum() == 2.0


def test_hungarian_matches_exhaustive_search():
    rng = make_rng(10)
    for _ in range(5):
        cost = rng.standard_normal((7, 7))
        _, best = brute_force_assignment(cost)
        assert cost[np.arange(7), hungarian(cost)].sum() == pytest.approx(best, abs=1e-12)


def test_discretization_recovers_permutation():
    P = np.array([3, 0, 2, 1])
    X = permutation_matrix(P) / 4
    noisy = 0.9 * X + 0.1 / 16
    assert discretize_solution(X).tolist() == P.tolist()
    assert discretize_solution(noisy).tolist() == P.tolist()
    assert discretize_solution(X, "greedy").tolist() == P.tolist()


def test_greedy_agrees_when_entries_do_not_conflict():
    rng = make_rng(11)
    P = rng.permutation(6)
    X = permutation_matrix(P) / 6 + 0.01 * rng.random((6, 6)) / 6
    assert greedy_discretize(X).tolist() == hungarian(-X).tolist() == P.tolist()


def test_greedy_never_beats_hungarian():
    rng = make_rng(12)
    for _ in range(10):
        X = random_coupling(6, rng)
        g, h = greedy_discretize(X), hungarian(-X)
        assert X[np.arange(6), g].sum() <= X[np.arange(6), h].sum() + 1e-12


def test_hungarian_is_scale_invariant():
    X = make_rng(13).random((6, 6))
    assert hungarian(-X).tolist() == hungarian(-6.0 * X).tolist()


def test_unknown_discretization():
    with pytest.raises(ValueError):
        discretize_solution(np.eye(2) / 2, "auction")


# End-to-end

FAST = dict(backend="exact", max_outer=100)


def test_graph_matched_to_itself_gives_identity():
    g = complete_graph(6, seed=14)
    result = match_graphs(g, g, build_settings(None, **FAST))
    assert result.perm.tolist() == list(range(6))
    assert result.objective == pytest.approx(-2.0 * g.m, rel=1e-12)
    assert result.dummy_assignments() == []


def test_zero_noise_pair_is_matched_exactly():
    g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=10, rho=1.0, sigma=0.0, seed=15))
    result = match_graphs(g1, g2, build_settings(None, **FAST))
    assert matching_accuracy(result.perm, truth) == 1.0


def test_unequal_sizes_flag_dummies():
    g_small, g_big = complete_graph(4, seed=16), complete_graph(6, seed=17)
    result = match_graphs(g_small, g_big, build_settings(None, **FAST))
    assert sorted(result.perm.tolist()) == list(range(6))
    assert result.n1 == 4 and result.n2 == 6
    assert result.dummy_assignments() == [4, 5]
    flipped = match_graphs(g_big, g_small, build_settings(None, **FAST))
    assert flipped.dummy_assignments() == [i for i in range(6) if flipped.perm[i] >= 4]


def test_result_dictionary():
    g = complete_graph(4, seed=18)
    payload = match_graphs(g, g, build_settings(None, **FAST)).to_dict(include_trace=True)
    assert payload["n"] == 4 and len(payload["stages"]) == 11
    assert "records" in payload["stages"][0]
    timings = payload["timings"]
    assert set(timings) == {"prepare", "solve", "sinkhorn", "discretize"}
    assert 0.0 < timings["sinkhorn"] <= timings["solve"]
    assert payload["stages"][0]["sinkhorn_seconds"] > 0.0


def test_settings_validation():
    assert build_settings(None, alpha_grid="0:0.25:1").alpha_grid == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert build_settings(None, lam=None).lam == SolverSettings().lam
    with pytest.raises(ConfigError):
        build_settings(None, alpha_grid="0.2,1")
    with pytest.raises(ConfigError):
        build_settings(None, edge_kernel="custom")
    with pytest.raises(ConfigError):
        build_settings(None, lam=-1.0)


@pytest.mark.parametrize("seed", range(5))
def test_default_settings_match_synthetic_pairs(seed):
    g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=6, seed=seed))
    result = match_graphs(g1, g2, SolverSettings())
    assert sorted(result.perm.tolist()) == list(range(6))
    assert result.status in ("ok", "max_iters", "stalled")
    assert 0.0 <= matching_accuracy(result.perm, truth) <= 1.0


def test_default_settings_at_benchmark_size():
    g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=50, seed=21))
    result = match_graphs(g1, g2, SolverSettings())
    assert sorted(result.perm.tolist()) == list(range(50))
    assert result.outer_iterations > 0
    assert 0.0 <= matching_accuracy(result.perm, truth) <= 1.0


# Acceptance-scale runs

@pytest.mark.slow
def test_small_graphs_reach_brute_force_optimum():
    optimal = near_optimal = 0
    for seed in range(50):
        g1, g2, _ = generate_synthetic_pair(SyntheticConfig(n_in=6, rho=1.0, sigma=0.0, seed=seed))
        inst = prepare_instance(g1, g2, GAUSS, backend="exact")
        _, best = brute_force_qap(inst)
        result = match_graphs(g1, g2, build_settings(None, backend="exact"))
        optimal += result.objective <= best + 1e-9 * abs(best)
        near_optimal += result.objective <= best + 0.01 * abs(best)
    assert optimal >= 45
    assert near_optimal == 50


@pytest.mark.slow
def test_exact_matching_accuracy_with_random_features():
    accuracies = []
    for seed in range(20):
        g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=50, seed=1000 + seed))
        result = match_graphs(g1, g2, build_settings(None, dim=20, gamma=5.0, lam=0.005, seed=seed))
        accuracies.append(matching_accuracy(result.perm, truth))
    assert np.mean(accuracies) >= 0.95


@pytest.mark.slow
def test_smaller_lambda_is_at_least_as_accurate():
    mean = {}
    for lam in (0.005, 0.5):
        accuracies = []
        for seed in range(5):
            g1, g2, truth = generate_synthetic_pair(SyntheticConfig(n_in=100, n_out=100, seed=2000 + seed))
            result = match_graphs(g1, g2, build_settings(None, lam=lam, max_outer=100, seed=seed))
            accuracies.append(matching_accuracy(result.perm, truth))
        mean[lam] = np.mean(accuracies)
    assert mean[0.005] >= mean[0.5]


@pytest.mark.slow
def test_solve_time_grows_at_most_cubically():
    sizes = [100, 200, 400]
    seconds = []
    for n in sizes:
        g1, g2, _ = generate_synthetic_pair(SyntheticConfig(n_in=n, seed=3000 + n))
        settings = build_settings(None, alpha_grid="0,0.5,1", gap_tol=1e-300, max_outer=15)
        result = match_graphs(g1, g2, settings)
        seconds.append(result.timings["solve"] / max(result.outer_iterations, 1))
    slope = np.polyfit(np.log(sizes), np.log(seconds), 1)[0]
    assert slope <= 3.5
