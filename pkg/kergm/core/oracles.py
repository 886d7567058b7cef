"""Independent reference computations and the runtime oracle battery.

Everything here recomputes a quantity by a route that shares no code with the
solver: explicit loops for the grams, the n^2 x n^2 affinity matrix for the
quadratic term, a dual L-BFGS-B solve for the entropic direction, SLSQP on the
full coupling for F_alpha, exhaustive enumeration for assignments, and the
dense matrix exponential for heat kernels. The Hungarian-direction Frank-Wolfe
loop is the unregularized counterpart EnFW is compared against.
"""

import itertools
import logging
import time
from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import fmin_l_bfgs_b, minimize
from scipy.special import logsumexp, xlogy

from kergm.core.assignment import discretize_solution, hungarian
from kergm.core.enfw import StopCriteria, enfw_minimize, gap, quad_coeff, stepsize
from kergm.core.errors import CapExceededError, SinkhornError
from kergm.core.graph import (
    AttributedGraph,
    SyntheticConfig,
    generate_synthetic_pair,
    heat_diffusion_attrs,
    normalized_laplacian,
)
from kergm.core.kernels import KernelConfig, eval_kernel
from kergm.core.objective import (
    QapInstance,
    brute_force_qap,
    f_alpha,
    grad_j_alpha,
    hessian_apply,
    j_alpha,
    j_aux,
    lawler_affinity_oracle,
    objective_gm,
    prepare_instance,
    quadratic_term,
)
from kergm.core.sinkhorn import SinkhornConfig, sinkhorn_solve, uniform_coupling
from kergm.core.utils import make_rng, permutation_matrix

logger = logging.getLogger(__name__)

ASSIGNMENT_CAP = 8
DEFAULT_SIZES = (4, 5, 6)


def random_graph(n: int, rho: float, d_edge: int, rng: np.random.Generator) -> AttributedGraph:
    """Erdős–Rényi graph with U[0, 1] edge attributes of dimension ``d_edge``."""
    rows, cols = np.triu_indices(n, 1)
    keep = rng.random(rows.size) < rho
    edges = np.stack([rows[keep], cols[keep]], axis=1)
    return AttributedGraph(n, edges, rng.random((int(keep.sum()), d_edge)))


def random_coupling(n: int, rng: np.random.Generator, parts: int = 5) -> np.ndarray:
    """Random point of the scaled Birkhoff polytope as a mixture of permutations."""
    weights = rng.dirichlet(np.ones(parts))
    X = np.zeros((n, n))
    for w in weights:
        X += w * permutation_matrix(rng.permutation(n))
    return X / n


def loop_gram_self(g: AttributedGraph, cfg: KernelConfig) -> np.ndarray:
    """``[Psi* Psi]_ij = sum_k k(q_ik, q_kj)`` over 2-paths i-k-j, by explicit loops."""
    attrs = _attr_lookup(g)
    S = np.zeros((g.n, g.n))
    for i in range(g.n):
        for j in range(g.n):
            for k in range(g.n):
                if (i, k) in attrs and (k, j) in attrs:
                    S[i, j] += eval_kernel(cfg, attrs[i, k], attrs[k, j])
    return S


def loop_cross_gram(g1: AttributedGraph, g2: AttributedGraph, cfg: KernelConfig,
                    X: np.ndarray) -> np.ndarray:
    """``[(Psi1 ⊙ X)* Psi2]_ia = sum X_kc k(q1_ik, q2_ca)`` over edges (i,k) and (c,a)."""
    a1, a2 = _attr_lookup(g1), _attr_lookup(g2)
    C = np.zeros((g1.n, g2.n))
    for (i, k), q1 in a1.items():
        for (c, a), q2 in a2.items():
            C[i, a] += X[k, c] * eval_kernel(cfg, q1, q2)
    return C


def _attr_lookup(g: AttributedGraph) -> dict[tuple[int, int], np.ndarray]:
    out = {}
    for (i, j), q in zip(g.edges, g.edge_attrs):
        out[int(i), int(j)] = q
        out[int(j), int(i)] = q
    return out


def lawler_quadratic(inst: QapInstance, cfg: KernelConfig, X: np.ndarray) -> float:
    """``vec(X)^T K vec(X)`` with the explicit affinity matrix."""
    K = lawler_affinity_oracle(inst.g1, inst.g2, cfg)
    x = np.asarray(X, dtype=np.float64).ravel(order="F")
    return float(x @ K @ x)


def finite_difference_gradient(fn: Callable[[np.ndarray], float], X: np.ndarray,
                               h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function of a matrix."""
    grad = np.zeros_like(X)
    for idx in np.ndindex(*X.shape):
        E = np.zeros_like(X)
        E[idx] = h
        grad[idx] = (fn(X + E) - fn(X - E)) / (2.0 * h)
    return grad


def entropic_objective(C: np.ndarray, Y: np.ndarray, lam: float) -> float:
    return float(np.vdot(C, Y)) + lam * float(xlogy(Y, Y).sum())


def entropic_direction_reference(C: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Solve the entropic direction problem through its semi-dual with L-BFGS-B.

    For column potentials g the row potentials are eliminated in closed form,
    ``f_i = lam log(1/n) - lam lse_j((g_j - C_ij) / lam - 1)``, and the concave dual
    ``mean(f) + mean(g) - lam`` is maximized. Strong duality makes the returned
    dual value equal the primal optimum.

    Returns:
        Plan recovered from the dual optimum, and the optimal value
    """
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    log_a = -np.log(n)

    def negdual(g: np.ndarray) -> tuple[float, np.ndarray]:
        Z = (g[None, :] - C) / lam - 1.0
        f = lam * (log_a - logsumexp(Z, axis=1))
        plan = np.exp(Z + f[:, None] / lam)
        value = f.mean() + g.mean() - lam
        grad = 1.0 / n - plan.sum(axis=0)
        return -value, -grad

    g, value, _ = fmin_l_bfgs_b(negdual, np.zeros(n), m=20, factr=10.0, pgtol=1e-14,
                                maxiter=20000)
    Z = (g[None, :] - C) / lam - 1.0
    f = lam * (log_a - logsumexp(Z, axis=1))
    return np.exp(Z + f[:, None] / lam), -float(value)


def convex_reference_optimum(inst: QapInstance, alpha: float, lam: float) -> tuple[np.ndarray, float]:
    """Minimize F_alpha over the scaled Birkhoff polytope with SLSQP on all n^2 entries.

    One column-sum constraint is dropped since it is implied by the others.
    """
    n = inst.n
    rows = np.kron(np.eye(n), np.ones((1, n)))
    cols = np.kron(np.ones((1, n)), np.eye(n))[:-1]
    A = np.vstack([rows, cols])
    b = np.full(A.shape[0], 1.0 / n)

    def fun(x: np.ndarray) -> tuple[float, np.ndarray]:
        X = np.maximum(x, 0.0).reshape(n, n)
        grad = grad_j_alpha(inst, X, alpha, normalized=True) + lam * (np.log(np.maximum(X, 1e-300)) + 1.0)
        return f_alpha(inst, X, alpha, lam), grad.ravel()

    res = minimize(
        fun, np.full(n * n, 1.0 / (n * n)), jac=True, method="SLSQP",
        bounds=[(1e-12, 1.0)] * (n * n),
        constraints=[{"type": "eq", "fun": lambda x: A @ x - b, "jac": lambda x: A}],
        options={"ftol": 1e-15, "maxiter": 2000},
    )
    X = np.maximum(res.x, 0.0).reshape(n, n)
    return X, f_alpha(inst, X, alpha, lam)


def brute_force_assignment(cost: np.ndarray, cap: int = ASSIGNMENT_CAP) -> tuple[np.ndarray, float]:
    """Minimum-cost assignment by enumerating every permutation."""
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if n > cap:
        raise CapExceededError(f"exhaustive assignment is capped at n={cap}, got n={n}")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
    k = int(np.argmin(totals))
    return perms[k], float(totals[k])


def heat_kernel_reference(g: AttributedGraph, t: float) -> np.ndarray:
    """``expm(-t L)`` by scaling and squaring."""
    return scipy.linalg.expm(-t * normalized_laplacian(g))


def hungarian_frank_wolfe(
    inst: QapInstance,
    alpha: float,
    X0: Optional[np.ndarray] = None,
    max_outer: int = 500,
    gap_tol: float = 1e-12,
) -> tuple[np.ndarray, float, int]:
    """Unregularized Frank-Wolfe on J_alpha with a vertex direction from the Hungarian method.

    The direction is the scaled permutation minimizing ``<grad, P>``; the step is
    the same closed form as in EnFW. Each iteration costs an O(n^3) assignment,
    so this is only meant as a comparator on small instances.

    Returns:
        Final coupling, its Frank-Wolfe gap ``<grad, X - Y>`` and the number of steps
    """
    n = inst.n
    X = uniform_coupling(n) if X0 is None else np.asarray(X0, dtype=np.float64).copy()
    t = 0
    while True:
        grad = grad_j_alpha(inst, X, alpha, normalized=True)
        Y = permutation_matrix(hungarian(grad)) / n
        G = max(float(np.vdot(grad, X - Y)), 0.0)
        if G <= gap_tol or t == max_outer:
            return X, G, t
        D = Y - X
        Q = 0.5 * float(np.vdot(hessian_apply(inst, D, alpha), D))
        X = X + stepsize(G, Q) * D
        t += 1


@dataclass
class OracleCheck:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _rel_matrix(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.abs(A - B).max() / max(np.abs(A).max(), np.abs(B).max(), 1e-300))


def oracle_battery(
    seed: int = 0,
    sizes: Sequence[int] = DEFAULT_SIZES,
    gradient_perturbation: float = 0.0,
) -> dict[str, Any]:
    """Run every independent cross-check on small random instances.

    Args:
        seed: Seed of the instance generator
        sizes: Graph sizes to check (each at most 8)
        gradient_perturbation: Added to the analytic gradient before the
            finite-difference comparison; a nonzero value must make that check fail

    Returns:
        Dictionary with ``passed`` and the list of ``checks``
    """
    sizes = [int(n) for n in sizes]
    if any(n > ASSIGNMENT_CAP or n < 2 for n in sizes):
        raise CapExceededError(f"battery sizes must lie in [2, {ASSIGNMENT_CAP}], got {sizes}")
    rng = make_rng(seed)
    gauss = KernelConfig("gaussian_sq", gamma=5.0)
    linear = KernelConfig("linear")
    checks: list[OracleCheck] = []
    started = time.perf_counter()

    def record(name: str, value: float, threshold: float, detail: str = "") -> None:
        ok = bool(np.isfinite(value) and value <= threshold)
        checks.append(OracleCheck(name, ok, float(value), threshold, detail))
        logger.debug("oracle %s: %.3g (threshold %.1g) %s", name, value, threshold,
                     "ok" if ok else "FAILED")

    for n in sizes:
        g1 = random_graph(n, 0.6, 2, rng)
        g2 = random_graph(n, 0.6, 2, rng)
        exact = prepare_instance(g1, g2, gauss, backend="exact")
        X = random_coupling(n, rng)

        record(f"lawler_equivalence[n={n}]",
               _relative(quadratic_term(exact, X), lawler_quadratic(exact, gauss, X)), 1e-9)
        record(f"gram_self_loops[n={n}]", _rel_matrix(exact.s1, loop_gram_self(g1, gauss)), 1e-12)
        record(f"cross_gram_loops[n={n}]",
               _rel_matrix(exact.backend.cross(X), loop_cross_gram(g1, g2, gauss, X)), 1e-12)

        deviation = max(_relative(j_aux(exact, permutation_matrix(rng.permutation(n))), exact.c_aux)
                        for _ in range(50))
        record(f"j_aux_constant[n={n}]", deviation, 1e-9)

        alpha = float(rng.random())
        analytic = grad_j_alpha(exact, X, alpha) + gradient_perturbation
        numeric = finite_difference_gradient(lambda Z: j_alpha(exact, Z, alpha), X)
        record(f"gradient_fd[n={n}]", _rel_matrix(analytic, numeric), 1e-5, f"alpha={alpha:.3f}")

        lin_exact = prepare_instance(g1, g2, linear, backend="exact")
        lin_rff = prepare_instance(g1, g2, linear, backend="rff")
        record(f"backend_agreement[n={n}]",
               _rel_matrix(grad_j_alpha(lin_exact, X, alpha), grad_j_alpha(lin_rff, X, alpha)), 1e-10)

        Y = random_coupling(n, rng)
        D = Y - X
        base = j_alpha(exact, X, alpha, normalized=True)
        slope = float(np.vdot(grad_j_alpha(exact, X, alpha, normalized=True), D))
        Q = quad_coeff(exact, X, Y, alpha)
        taylor = max(abs(j_alpha(exact, X + s * D, alpha, normalized=True) - (base + s * slope + s * s * Q))
                     for s in (0.25, 0.5, 1.0))
        record(f"quad_coeff_taylor[n={n}]", taylor / max(1.0, abs(base)), 1e-10)

        rows = np.arange(n)
        by_greedy = float(X[rows, discretize_solution(X, "greedy")].sum())
        by_hungarian = float(X[rows, discretize_solution(X, "hungarian")].sum())
        record(f"greedy_below_hungarian[n={n}]", by_greedy - by_hungarian, 1e-12)

        p1, p2, truth = generate_synthetic_pair(SyntheticConfig(n_in=n, seed=int(rng.integers(2**31))))
        pair = prepare_instance(p1, p2, gauss, backend="exact")
        _, best = brute_force_qap(pair)
        at_truth = objective_gm(pair, permutation_matrix(truth.mapping))
        record(f"brute_force_truth[n={n}]", _relative(at_truth, best), 1e-9)

        ts = (0.5, 1.0, 2.0)
        heat = heat_diffusion_attrs(g1, ts)
        if g1.m:
            i, j = g1.edges[:, 0], g1.edges[:, 1]
            refs = np.stack([heat_kernel_reference(g1, t)[i, j] for t in ts], axis=1)
            record(f"heat_kernel_expm[n={n}]", _rel_matrix(heat.edge_attrs, refs), 1e-10)
            record(f"heat_kernel_bound[n={n}]", float(np.abs(heat.edge_attrs).max()) / n, 1.0)

    C = rng.random((6, 6))
    for lam in (0.005, 0.05, 0.5):
        direction = sinkhorn_solve(C, SinkhornConfig(lam=lam, tol=1e-10))
        _, ref_value = entropic_direction_reference(C, lam)
        record(f"sinkhorn_reference[lam={lam}]",
               abs(entropic_objective(C, direction.plan, lam) - ref_value), 1e-6)

    n = max(sizes)
    g1 = random_graph(n, 0.6, 1, rng)
    g2 = random_graph(n, 0.6, 1, rng)
    inst = prepare_instance(g1, g2, gauss, backend="exact")
    lam = 0.05
    X_ref, F_ref = convex_reference_optimum(inst, 0.0, lam)
    X_fw, report = enfw_minimize(inst, 0.0, lam, stop=StopCriteria(gap_tol=1e-9, max_outer=5000),
                                 sinkhorn=SinkhornConfig(lam=lam, tol=1e-12))
    record("convex_optimum", abs(f_alpha(inst, X_fw, 0.0, lam) - F_ref), 1e-5,
           f"status={report.status}")
    Y_ref = sinkhorn_solve(grad_j_alpha(inst, X_ref, 0.0, normalized=True),
                           SinkhornConfig(lam=lam, tol=1e-12)).plan
    record("reference_stationarity", gap(inst, X_ref, 0.0, lam, Y_ref), 1e-6)

    # F and the gap are only as exact as the direction's marginals
    sharp = SinkhornConfig(lam=lam, tol=1e-14)
    worst = 0.0
    for alpha in (0.0, 0.5, 1.0):
        _, rep = enfw_minimize(inst, alpha, lam, stop=StopCriteria(max_outer=100), sinkhorn=sharp)
        rise = float(np.diff(rep.f_trace).max(initial=0.0))
        worst = max(worst, rise, -min(rep.gaps, default=0.0))
    record("enfw_monotone_descent", worst, 1e-12)

    small = 1e-3
    try:
        X_en, _ = enfw_minimize(inst, 0.0, small, stop=StopCriteria(gap_tol=1e-10, max_outer=3000),
                                sinkhorn=SinkhornConfig(lam=small, tol=1e-12))
        Y_en = sinkhorn_solve(grad_j_alpha(inst, X_en, 0.0, normalized=True),
                              SinkhornConfig(lam=small, tol=1e-12)).plan
        G_en = max(gap(inst, X_en, 0.0, small, Y_en), 0.0)
    except SinkhornError as e:
        record("enfw_vs_hungarian_fw", np.inf, 1e-9, str(e))
    else:
        X_hf, G_hf, steps = hungarian_frank_wolfe(inst, 0.0, max_outer=2000)
        # the entropy term moves the optimum of J_0 by at most lam log n
        spread = abs(j_alpha(inst, X_en, 0.0, normalized=True) - j_alpha(inst, X_hf, 0.0, normalized=True))
        record("enfw_vs_hungarian_fw", spread - (small * np.log(n) + G_en + G_hf), 1e-9,
               f"fw_gap={G_hf:.2g} fw_steps={steps}")

    cost = rng.standard_normal((7, 7))
    _, best = brute_force_assignment(cost)
    perm = hungarian(cost)
    record("hungarian_exhaustive", abs(float(cost[np.arange(7), perm].sum()) - best), 1e-12)

    path = AttributedGraph(2, np.array([[0, 1]]), np.ones((1, 1)))
    heat = heat_diffusion_attrs(path, [1.0])
    record("heat_kernel_path", abs(float(heat.edge_attrs[0, 0]) - heat_kernel_reference(path, 1.0)[0, 1]),
           1e-12)

    passed = all(c.passed for c in checks)
    return {
        "passed": passed,
        "seed": seed,
        "sizes": sizes,
        "seconds": time.perf_counter() - started,
        "checks": [asdict(c) for c in checks],
    }
