"""Experiment configuration actions."""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from kergm.core.errors import ConfigError, KergmError
from kergm.core.matcher import SolverSettings

ExperimentKind = Literal[
    "accuracy_outliers",
    "accuracy_noise",
    "accuracy_density",
    "scalability",
    "sensitivity_lambda",
    "sensitivity_D",
    "match_files",
    "oracle_battery",
]

DEFAULT_SWEEPS: dict[str, list[float]] = {
    "accuracy_outliers": [0, 10, 20, 30, 40, 50],
    "accuracy_noise": [0.0, 0.04, 0.08, 0.12, 0.16, 0.2],
    "accuracy_density": [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    "scalability": [50, 100, 200, 400],
    "sensitivity_lambda": [0.005, 0.05, 0.5],
    "sensitivity_D": [5, 10, 20, 50],
    "match_files": [0],
    "oracle_battery": [4, 5, 6],
}

SOLVER_FLAGS = ("lam", "alpha_grid", "backend", "dim", "gamma", "discretize")

SYNTHETIC_BASE: dict[str, Any] = {"n_in": 50, "n_out": 0, "rho": 1.0, "sigma": 0.0}

# Base point of each experiment; unset synthetic fields fall back to these.
EXPERIMENT_BASES: dict[str, dict[str, Any]] = {
    "accuracy_density": {"n_out": 5, "sigma": 0.1},
    "sensitivity_lambda": {"n_in": 500},
    "sensitivity_D": {"n_in": 500},
}

SENSITIVITY_N_OUT = [0, 100, 200, 300, 400, 500]
SENSITIVITY_KEYS = {"sensitivity_lambda": "lam", "sensitivity_D": "D"}


def grid_point(kind: str, value: float, n_out: int) -> str:
    """Sweep point of a sensitivity grid, e.g. ``lam=0.005,n_out=100``."""
    return f"{SENSITIVITY_KEYS[kind]}={value},n_out={n_out}"


def parse_grid_point(point: str) -> tuple[float, int]:
    """Split a sensitivity grid point into the swept value and n_out.

    Raises:
        ConfigError: the point is not of the form ``<key>=<value>,n_out=<count>``
    """
    try:
        fields = dict(part.split("=", 1) for part in str(point).split(","))
        n_out = int(fields.pop("n_out"))
        (value,) = fields.values()
        return float(value), n_out
    except (KeyError, ValueError) as e:
        raise ConfigError(f"malformed grid point {point!r}") from e


class ExperimentConfig(BaseModel):
    """A benchmark run: what to sweep, how often, and with which solver settings.

    The synthetic parameters (``n_in``, ``n_out``, ``rho``, ``sigma``) are the
    base point; the experiment kind decides which one the sweep replaces. Unset
    ones take the experiment's own base (see ``EXPERIMENT_BASES``). Sensitivity
    experiments also step through ``n_out_grid`` and default to n_out 0 to 500.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentKind = "accuracy_outliers"
    sweep: Optional[list[float]] = None
    n_out_grid: Optional[list[int]] = None
    trials: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    out: str = "results.csv"
    workers: int = Field(default=1, ge=1)
    n_in: Optional[int] = Field(default=None, ge=1)
    n_out: Optional[int] = Field(default=None, ge=0)
    rho: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    sigma: Optional[float] = Field(default=None, ge=0.0)
    g1: Optional[str] = None
    g2: Optional[str] = None
    truth: Optional[str] = None
    heat: Optional[list[float]] = None
    solver: SolverSettings = Field(default_factory=SolverSettings)

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.sweep is not None and len(self.sweep) == 0:
            raise ValueError("sweep must not be empty")
        if self.n_out_grid is not None:
            if self.experiment not in SENSITIVITY_KEYS:
                raise ValueError("n_out_grid applies to sensitivity experiments only")
            if not self.n_out_grid or min(self.n_out_grid) < 0:
                raise ValueError("n_out_grid must be non-empty and nonnegative")
        if self.experiment == "match_files" and (self.g1 is None or self.g2 is None):
            raise ValueError("match_files needs g1 and g2 paths")
        return self

    @property
    def synthetic_base(self) -> dict[str, Any]:
        """Resolved ``n_in``, ``n_out``, ``rho`` and ``sigma`` of the base point."""
        base = {**SYNTHETIC_BASE, **EXPERIMENT_BASES.get(self.experiment, {})}
        for key in SYNTHETIC_BASE:
            value = getattr(self, key)
            if value is not None:
                base[key] = value
        return base

    @property
    def grid(self) -> Optional[list[int]]:
        """Outlier counts a sensitivity experiment steps through, if any."""
        if self.experiment not in SENSITIVITY_KEYS:
            return None
        if self.n_out_grid is not None:
            return [int(v) for v in self.n_out_grid]
        return None if self.n_out is not None else list(SENSITIVITY_N_OUT)

    @property
    def points(self) -> list[Any]:
        values = self.sweep if self.sweep is not None else DEFAULT_SWEEPS[self.experiment]
        integral = self.experiment in ("accuracy_outliers", "scalability", "sensitivity_D",
                                       "oracle_battery")
        values = [int(v) if integral else float(v) for v in values]
        grid = self.grid
        if grid is None:
            return values
        return [grid_point(self.experiment, v, n_out) for v in values for n_out in grid]


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a TOML configuration file into a plain dictionary.

    Raises:
        ConfigError: the file is missing or is not valid TOML
    """
    path = Path(path)
    try:
        with path.open("rb") as f:
            return tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e


def build_experiment_config(
    config_dict: Optional[dict[str, Any]] = None, **overrides: Any
) -> ExperimentConfig:
    """Merge non-None overrides over a configuration dictionary and validate.

    Solver flags (``lam``, ``alpha_grid``, ``backend``, ``dim``, ``gamma``,
    ``discretize``) go into the ``solver`` table; the master seed also seeds
    the solver's random features unless the file sets one.

    Raises:
        ConfigError: the merged configuration is invalid
    """
    config = dict(config_dict or {})
    solver = dict(config.get("solver", {}))
    for key, value in overrides.items():
        if value is None:
            continue
        if key in SOLVER_FLAGS:
            solver[key] = value
        else:
            config[key] = value
    if "seed" in config and "seed" not in solver:
        solver["seed"] = config["seed"]
    config["solver"] = solver
    try:
        return ExperimentConfig(**config)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid configuration at {where or '<root>'}: {first['msg']}") from e


def set_config(
    config_path: str | None = None,
    experiment: str | None = None,
    sweep: list[float] | None = None,
    trials: int | None = None,
    seed: int | None = None,
    out: str | None = None,
    workers: int | None = None,
    lam: float | None = None,
    alpha_grid: str | None = None,
    backend: str | None = None,
    dim: int | None = None,
    gamma: float | None = None,
    discretize: str | None = None,
    n_out_grid: list[int] | None = None,
    config_dict: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Resolve an experiment configuration from a file, a dictionary and overrides.

    Args:
        config_path: TOML file to start from
        experiment: Experiment kind
        sweep: Sweep values replacing the default grid
        trials: Trials per sweep point
        seed: Master seed
        out: CSV output path
        workers: Parallel trial workers
        lam: Entropy weight
        alpha_grid: Path-following grid (``0:0.1:1`` or ``0,0.5,1``)
        backend: ``exact`` or ``rff``
        dim: Random feature dimension
        gamma: Edge kernel bandwidth
        discretize: ``hungarian`` or ``greedy``
        n_out_grid: Outlier counts a sensitivity experiment steps through
        config_dict: Optional dictionary merged over the file's contents

    Returns:
        Dictionary with the resolved configuration
    """
    try:
        base = load_config_file(config_path) if config_path else {}
        if config_dict:
            base.update(config_dict)
        cfg = build_experiment_config(
            base, experiment=experiment, sweep=sweep, trials=trials, seed=seed, out=out,
            workers=workers, lam=lam, alpha_grid=alpha_grid, backend=backend, dim=dim,
            gamma=gamma, discretize=discretize, n_out_grid=n_out_grid,
        )
    except KergmError as e:
        return {"error": str(e), "action": "set_config", "exit_code": e.exit_code}
    return {"success": True, "action": "set_config", "config": cfg.model_dump(mode="json")}
