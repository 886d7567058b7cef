"""Entropy-regularized Frank-Wolfe and the convex-to-concave path.

Each outer iteration takes the gradient of J_alpha at X_t, finds the entropic
direction Y_t with Sinkhorn, and moves to ``X_t + s_t (Y_t - X_t)`` with the
closed-form step ``s_t = min(G_t / (2 Q_t), 1)`` (1 when ``Q_t <= 0``). Because
J_alpha is quadratic and the entropy convex, F_alpha never increases.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from kergm.core.errors import ConfigError, DomainError
from kergm.core.objective import QapInstance, entropy, grad_j_alpha, hessian_apply, j_aux
from kergm.core.sinkhorn import SinkhornConfig, sinkhorn_solve, uniform_coupling
from kergm.core.utils import check_square

logger = logging.getLogger(__name__)

STALL_STEP = 1e-12
DEFAULT_GRID = tuple(round(0.1 * k, 10) for k in range(11))


def check_alpha_grid(grid: tuple[float, ...]) -> tuple[float, ...]:
    if len(grid) < 2 or grid[0] != 0.0 or grid[-1] != 1.0:
        raise ValueError("alpha grid must start at 0 and end at 1")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("alpha grid must be strictly increasing")
    return grid


class PathParams(BaseModel):
    """Alpha grid from the convex (0) to the concave (1) relaxation, and the entropy weight."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha_grid: tuple[float, ...] = DEFAULT_GRID
    lam: float = Field(default=0.005, gt=0.0)

    @field_validator("alpha_grid")
    @classmethod
    def _check_grid(cls, grid: tuple[float, ...]) -> tuple[float, ...]:
        return check_alpha_grid(grid)


class StopCriteria(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    gap_tol: Optional[float] = Field(default=None, gt=0.0)
    max_outer: int = Field(default=300, ge=1)

    def tolerance(self, n: int) -> float:
        """Gap tolerance; defaults to 1e-6 * n since the gap sums n^2 entry terms."""
        return self.gap_tol if self.gap_tol is not None else 1e-6 * max(n, 1)


def parse_alpha_grid(text: str) -> tuple[float, ...]:
    """Parse ``start:step:stop`` or a comma-separated list into an alpha grid."""
    text = text.strip()
    try:
        if ":" in text:
            start, step, stop = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            grid = [round(start + k * step, 12) for k in range(count)]
        else:
            grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid alpha grid {text!r}: {e}") from e
    return tuple(grid)


@dataclass
class IterationRecord:
    t: int
    f_value: float
    gap: Optional[float]
    quad: Optional[float]
    step: Optional[float]
    sinkhorn_iters: int
    cost_shift: float
    seconds: float


@dataclass
class EnfwReport:
    alpha: float
    lam: float
    records: list[IterationRecord] = field(default_factory=list)
    status: str = "max_iters"
    seconds: float = 0.0
    sinkhorn_seconds: float = 0.0

    @property
    def iterations(self) -> int:
        """Number of steps taken (the final gap check is not a step)."""
        return sum(1 for r in self.records if r.step is not None)

    @property
    def f_trace(self) -> list[float]:
        return [r.f_value for r in self.records]

    @property
    def gaps(self) -> list[float]:
        return [r.gap for r in self.records if r.gap is not None]

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "lam": self.lam,
            "status": self.status,
            "iterations": self.iterations,
            "seconds": self.seconds,
            "sinkhorn_seconds": self.sinkhorn_seconds,
            "final_f": self.records[-1].f_value if self.records else None,
            "final_gap": self.gaps[-1] if self.gaps else None,
            "records": [asdict(r) for r in self.records],
        }


def _gap_value(grad: np.ndarray, X: np.ndarray, Y: np.ndarray, lam: float) -> float:
    return float(np.vdot(grad, X - Y)) + lam * (entropy(X) - entropy(Y))


def gap(inst: QapInstance, X: np.ndarray, alpha: float, lam: float, Y_opt: np.ndarray) -> float:
    """``<grad, X> + lam H(X) - (<grad, Y_opt> + lam H(Y_opt))`` with the gradient of F_alpha's J."""
    grad = grad_j_alpha(inst, X, alpha, normalized=True)
    return _gap_value(grad, X, Y_opt, lam)


def quad_coeff(inst: QapInstance, X: np.ndarray, Y: np.ndarray, alpha: float) -> float:
    """Coefficient of s^2 in ``J_alpha(X + s (Y - X))``."""
    D = check_square(Y, inst.n) - check_square(X, inst.n)
    return 0.5 * float(np.vdot(hessian_apply(inst, D, alpha), D))


def stepsize(G: float, Q: float) -> float:
    if G < 0:
        raise DomainError(f"stepsize needs a nonnegative gap, got {G:.3g}")
    if Q <= 0:
        return 1.0
    return min(G / (2.0 * Q), 1.0)


def _f_value(inst: QapInstance, X: np.ndarray, cross: np.ndarray, alpha: float, lam: float) -> float:
    j_gm = -float(np.vdot(inst.kn, X)) - float(np.vdot(X, cross))
    return j_gm + (1.0 - 2.0 * alpha) * j_aux(inst, X) + lam * entropy(X)


def enfw_minimize(
    inst: QapInstance,
    alpha: float,
    lam: float,
    X0: Optional[np.ndarray] = None,
    stop: Optional[StopCriteria] = None,
    sinkhorn: Optional[SinkhornConfig] = None,
) -> tuple[np.ndarray, EnfwReport]:
    """Minimize F_alpha over the scaled Birkhoff polytope starting from X0.

    Stops when the gap falls to the tolerance (``gap_converged``), after
    ``max_outer`` steps (``max_iters``), or after two consecutive steps
    shorter than 1e-12 (``stalled``).

    Raises:
        SinkhornError: a direction solve failed to converge
    """
    stop = stop or StopCriteria()
    sinkhorn = (sinkhorn or SinkhornConfig()).model_copy(update={"lam": lam})
    n = inst.n
    X = uniform_coupling(n) if X0 is None else check_square(X0, n).copy()
    tol = stop.tolerance(n)
    report = EnfwReport(alpha=float(alpha), lam=float(lam))
    started = time.perf_counter()

    cross = inst.backend.cross(X)
    f_val = _f_value(inst, X, cross, alpha, lam)
    potentials = None
    small_steps = 0
    for t in range(stop.max_outer + 1):
        tick = time.perf_counter()
        grad = grad_j_alpha(inst, X, alpha, normalized=True, cross=cross)
        direction = sinkhorn_solve(grad, sinkhorn, potentials)
        report.sinkhorn_seconds += direction.seconds
        potentials = (direction.u, direction.v)
        Y = direction.plan
        G = _gap_value(grad, X, Y, lam)
        if G <= tol or t == stop.max_outer:
            report.records.append(IterationRecord(
                t, f_val, G, None, None, direction.iterations, direction.shift,
                time.perf_counter() - tick))
            report.status = "gap_converged" if G <= tol else "max_iters"
            break
        D = Y - X
        cross_d = inst.backend.cross(D)
        Q = 0.5 * float(np.vdot(hessian_apply(inst, D, alpha, cross=cross_d), D))
        s = stepsize(G, Q)
        report.records.append(IterationRecord(
            t, f_val, G, Q, s, direction.iterations, direction.shift,
            time.perf_counter() - tick))
        logger.debug("alpha=%.3g t=%d F=%.10g G=%.3g Q=%.3g s=%.3g sinkhorn=%d",
                     alpha, t, f_val, G, Q, s, direction.iterations)
        X = X + s * D
        cross = cross + s * cross_d
        f_val = _f_value(inst, X, cross, alpha, lam)
        small_steps = small_steps + 1 if s <= STALL_STEP else 0
        if small_steps >= 2:
            # no direction was solved at the final iterate
            report.records.append(IterationRecord(
                t + 1, f_val, None, None, None, 0, 0.0, 0.0))
            report.status = "stalled"
            break
    report.seconds = time.perf_counter() - started
    return X, report


def path_follow(
    inst: QapInstance,
    params: PathParams,
    X0: Optional[np.ndarray] = None,
    stop: Optional[StopCriteria] = None,
    sinkhorn: Optional[SinkhornConfig] = None,
) -> tuple[np.ndarray, list[EnfwReport]]:
    """Run EnFW at every alpha of the grid, warm-starting each stage from the previous one."""
    X = uniform_coupling(inst.n) if X0 is None else check_square(X0, inst.n)
    reports = []
    for alpha in params.alpha_grid:
        X, report = enfw_minimize(inst, alpha, params.lam, X, stop, sinkhorn)
        logger.info("alpha=%.3g status=%s iterations=%d F=%.8g", alpha, report.status,
                    report.iterations, report.records[-1].f_value)
        reports.append(report)
    return X, reports
