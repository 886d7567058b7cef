"""Sinkhorn-Knopp direction oracle on the scaled Birkhoff polytope.

Solves ``min <C, Y> + lam * sum Y log Y`` over ``Y >= 0`` with every row and
column summing to ``1/n``. The minimizer has the form
``Y = diag(e^u) exp(-C / lam - 1) diag(e^v)``; the scalings are found by
alternating row/column normalization, in the log domain by default.

At small ``lam`` plain sweeps contract very slowly once the plan is close to a
permutation. The log-domain solver therefore starts cold solves from a larger
``lam`` and lowers it geometrically (epsilon scaling), and finishes with damped
Newton steps on the dual when the sweeps stop making progress.
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp

from kergm.core.errors import SinkhornError
from kergm.core.utils import as_float_matrix

logger = logging.getLogger(__name__)

ANNEAL_FACTOR = 10.0
ANNEAL_SWEEPS = 100
NEWTON_BACKTRACKS = 30


class SinkhornConfig(BaseModel):
    """Sinkhorn settings.

    ``max_iters`` bounds the total work of one solve: scaling sweeps at every
    annealing level plus Newton steps.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    lam: float = Field(default=0.005, gt=0.0)
    tol: float = Field(default=1e-9, gt=0.0)
    max_iters: int = Field(default=10000, ge=1)
    log_domain: bool = True
    anneal: bool = True
    newton: bool = True
    newton_after: int = Field(default=50, ge=0)


@dataclass
class SinkhornResult:
    plan: np.ndarray
    u: np.ndarray
    v: np.ndarray
    iterations: int
    marginal_error: float
    shift: float
    seconds: float = 0.0
    newton_steps: int = 0


def marginal_error(Y: np.ndarray) -> float:
    """Largest deviation of a row or column sum from 1/n."""
    n = Y.shape[0]
    target = 1.0 / n
    return float(max(np.abs(Y.sum(axis=1) - target).max(), np.abs(Y.sum(axis=0) - target).max()))


def uniform_coupling(n: int) -> np.ndarray:
    """Barycenter of the scaled Birkhoff polytope, entries 1/n^2."""
    return np.full((n, n), 1.0 / (n * n))


def anneal_schedule(cost_range: float, lam: float) -> list[float]:
    """Entropy weights above ``lam``, largest first, each a factor ANNEAL_FACTOR apart.

    The first weight is at least the cost range, so its kernel is well spread.
    """
    levels = []
    current = lam * ANNEAL_FACTOR
    while current / ANNEAL_FACTOR < cost_range:
        levels.append(current)
        current *= ANNEAL_FACTOR
    return levels[::-1]


def sinkhorn_solve(
    C: np.ndarray,
    cfg: SinkhornConfig,
    potentials: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> SinkhornResult:
    """Entropic direction with its log-scalings, optionally warm-started from previous ones.

    The cost is shifted by its minimum first; the argmin is unchanged. Warm
    starts skip the annealing levels.

    Raises:
        SinkhornError: marginals not within ``cfg.tol`` after ``cfg.max_iters`` sweeps and steps
    """
    started = time.perf_counter()
    C = as_float_matrix(C, "cost")
    n = C.shape[0]
    if C.shape != (n, n):
        raise SinkhornError(f"cost must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise SinkhornError("cost has non-finite entries")
    if n == 0:
        return SinkhornResult(np.zeros((0, 0)), np.zeros(0), np.zeros(0), 0, 0.0, 0.0)
    shift = float(C.min())
    cost = C - shift
    warm = potentials is not None and potentials[0].shape == (n,)
    if warm:
        u, v = potentials[0].copy(), potentials[1].copy()
    else:
        u, v = np.zeros(n), np.zeros(n)
    if cfg.log_domain:
        result = _solve_log(cost, u, v, cfg, shift, anneal=cfg.anneal and not warm)
    else:
        result = _solve_plain(-cost / cfg.lam - 1.0, u, v, cfg, shift)
    result.seconds = time.perf_counter() - started
    return result


def _sweep(log_kernel: np.ndarray, v: np.ndarray, log_a: float) -> tuple[np.ndarray, np.ndarray]:
    u = log_a - logsumexp(log_kernel + v[None, :], axis=1)
    v = log_a - logsumexp(log_kernel + u[:, None], axis=0)
    return u, v


def _plan(log_kernel: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.exp(log_kernel + u[:, None] + v[None, :])


def _newton_step(log_kernel, u, v, plan, err):
    """One damped Newton step on the marginal equations; None when no step reduces the error.

    The Jacobian of (row sums, column sums) in (u, v) is
    ``[[diag(r), P], [P^T, diag(c)]]``; its kernel is spanned by (1, -1), so
    the last column potential is held fixed.
    """
    n = plan.shape[0]
    a = 1.0 / n
    rows, cols = plan.sum(axis=1), plan.sum(axis=0)
    residual = np.concatenate([rows - a, cols - a])[:-1]
    jac = np.block([[np.diag(rows), plan], [plan.T, np.diag(cols)]])[:-1, :-1]
    try:
        step = scipy.linalg.cho_solve(scipy.linalg.cho_factor(jac), -residual)
    except scipy.linalg.LinAlgError:
        step = None
    if step is None or not np.all(np.isfinite(step)):
        # nearly disconnected support: take the minimum-norm step
        step = scipy.linalg.lstsq(jac, -residual)[0]
    du, dv = step[:n], np.append(step[n:], 0.0)
    t = 1.0
    for _ in range(NEWTON_BACKTRACKS):
        u_new, v_new = u + t * du, v + t * dv
        trial = _plan(log_kernel, u_new, v_new)
        if np.all(np.isfinite(trial)) and marginal_error(trial) < err:
            return u_new, v_new
        t *= 0.5
    return None


def _solve_log(cost, u, v, cfg, shift, anneal) -> SinkhornResult:
    n = cost.shape[0]
    log_a = -np.log(n)
    used = 0
    lam_prev = cfg.lam
    if anneal:
        for level in anneal_schedule(float(cost.max()), cfg.lam):
            # potentials f = lam * u carry over between levels
            u, v = u * lam_prev / level, v * lam_prev / level
            lam_prev = level
            log_kernel = -cost / level - 1.0
            for _ in range(ANNEAL_SWEEPS):
                if used >= cfg.max_iters:
                    break
                u, v = _sweep(log_kernel, v, log_a)
                used += 1
                if marginal_error(_plan(log_kernel, u, v)) <= max(cfg.tol, 1e-3 / n):
                    break
        u, v = u * lam_prev / cfg.lam, v * lam_prev / cfg.lam

    log_kernel = -cost / cfg.lam - 1.0
    best_err, best_uv = np.inf, (u, v)
    sweeps = newton_steps = 0
    while True:
        plan = _plan(log_kernel, u, v)
        err = marginal_error(plan) if np.all(np.isfinite(plan)) else np.inf
        if err < best_err:
            best_err, best_uv = err, (u, v)
        if err <= cfg.tol:
            return SinkhornResult(plan, u, v, used, err, shift, newton_steps=newton_steps)
        if used >= cfg.max_iters:
            break
        if cfg.newton and sweeps >= cfg.newton_after and np.isfinite(err):
            step = _newton_step(log_kernel, u, v, plan, err)
            if step is not None:
                u, v = step
                used += 1
                newton_steps += 1
                continue
            # retry Newton after another round of sweeps
            sweeps = 0
        u, v = _sweep(log_kernel, v, log_a)
        used += 1
        sweeps += 1
    best_u, best_v = best_uv
    _fail(_plan(log_kernel, best_u, best_v), best_err, cfg)


def _solve_plain(log_kernel, u, v, cfg, shift) -> SinkhornResult:
    n = log_kernel.shape[0]
    a = 1.0 / n
    K = np.exp(log_kernel)
    if not np.all(np.isfinite(K)) or np.any(K.sum(axis=1) == 0) or np.any(K.sum(axis=0) == 0):
        raise SinkhornError(
            f"kernel exp(-C/lam) leaves floating-point range at lam={cfg.lam}; "
            "enable log_domain"
        )
    eu, ev = np.exp(u), np.exp(v)
    best_err, best_scalings = np.inf, (eu, ev)
    for it in range(1, cfg.max_iters + 1):
        if it > 1:
            err = float(np.abs(eu * (K @ ev) - a).max())
            if err < best_err:
                best_err, best_scalings = err, (eu.copy(), ev.copy())
            if err <= cfg.tol:
                plan = eu[:, None] * K * ev[None, :]
                return SinkhornResult(plan, np.log(eu), np.log(ev), it - 1,
                                      marginal_error(plan), shift)
        eu = a / (K @ ev)
        ev = a / (K.T @ eu)
        if not (np.all(np.isfinite(eu)) and np.all(np.isfinite(ev))):
            best_eu, best_ev = best_scalings
            raise SinkhornError(
                f"scaling vectors overflowed at lam={cfg.lam}; enable log_domain",
                best_eu[:, None] * K * best_ev[None, :], best_err, it,
            )
    best_eu, best_ev = best_scalings
    _fail(best_eu[:, None] * K * best_ev[None, :], best_err, cfg)


def _fail(best_plan, best_err, cfg) -> None:
    logger.warning("Sinkhorn did not converge: marginal error %.3g after %d iterations",
                   best_err, cfg.max_iters)
    raise SinkhornError(
        f"Sinkhorn did not reach tol={cfg.tol:g} in {cfg.max_iters} iterations "
        f"(marginal error {best_err:.3g})",
        best_plan, best_err, cfg.max_iters,
    )


def sinkhorn_direction(C: np.ndarray, cfg: SinkhornConfig) -> np.ndarray:
    """``argmin_Y <C, Y> + lam H(Y)`` over the scaled Birkhoff polytope."""
    return sinkhorn_solve(C, cfg).plan
