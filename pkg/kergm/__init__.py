"""KerGM - Kernelized graph matching with entropy-regularized Frank-Wolfe.

This module provides a stateless API for matching, generation and benchmarking.
"""

__version__ = "0.1.0"

from typing import Any, Optional, Sequence

from kergm.actions import (
    bench as bench_actions,
    config as config_actions,
    generate as generate_actions,
    match as match_actions,
    oracle as oracle_actions,
)
from kergm.core.errors import ConfigError
from kergm.core.graph import (
    AttributedGraph,
    GroundTruth,
    SyntheticConfig,
    generate_synthetic_pair,
    heat_diffusion_attrs,
    matching_accuracy,
)
from kergm.core.graph_io import load_graph, load_truth, save_graph, save_truth
from kergm.core.matcher import MatchResult, SolverSettings, build_settings, match_graphs
from kergm.core.oracles import oracle_battery


# Instances
def generate_pair(
    n_in: int = 50, n_out: int = 0, rho: float = 1.0, sigma: float = 0.0, seed: int = 0
) -> tuple[AttributedGraph, AttributedGraph, GroundTruth]:
    """Generate a synthetic pair and its ground truth in memory.

    Args:
        n_in: Inlier count
        n_out: Outlier count per graph
        rho: Edge density
        sigma: Attribute noise standard deviation
        seed: RNG seed

    Returns:
        ``(g1, g2, truth)``
    """
    return generate_synthetic_pair(
        SyntheticConfig(n_in=n_in, n_out=n_out, rho=rho, sigma=sigma, seed=seed)
    )


def generate(out_prefix: str, **kwargs: Any) -> dict:
    """Write a synthetic pair and its ground truth as JSON files.

    Returns:
        Dictionary with action result
    """
    return generate_actions.generate(out_prefix, **kwargs)


# Matching
def match(g1: AttributedGraph, g2: AttributedGraph, **settings: Any) -> MatchResult:
    """Match two in-memory graphs; keyword arguments override the default solver settings."""
    return match_graphs(g1, g2, build_settings(None, **settings))


def match_files(g1_path: str, g2_path: str, heat: Optional[Sequence[float]] = None,
                truth_path: Optional[str] = None, **settings: Any) -> dict:
    """Match two graph files.

    Returns:
        Dictionary with action result
    """
    try:
        resolved = build_settings(None, **settings)
    except ConfigError as e:
        return {"error": str(e), "action": "match", "exit_code": e.exit_code}
    return match_actions.match_files(g1_path, g2_path, resolved, heat=heat, truth_path=truth_path)


# Benchmarks
def set_config(**kwargs: Any) -> dict:
    """Resolve an experiment configuration.

    Returns:
        Dictionary with the resolved configuration
    """
    return config_actions.set_config(**kwargs)


def run_experiment(verify: bool = False, **kwargs: Any) -> dict:
    """Resolve an experiment configuration and run it, re-checking the written results if ``verify``.

    Returns:
        Dictionary with action result
    """
    resolved = config_actions.set_config(**kwargs)
    if not resolved.get("success"):
        return resolved
    return bench_actions.run_experiment(
        config_actions.ExperimentConfig(**resolved["config"]), verify=verify
    )


def run_oracles(seed: int = 0, sizes: Sequence[int] = (4, 5, 6)) -> dict:
    """Run the oracle battery.

    Returns:
        Dictionary with action result
    """
    return oracle_actions.run_oracles(seed=seed, sizes=sizes)


__all__ = [
    "__version__",
    "AttributedGraph",
    "GroundTruth",
    "MatchResult",
    "SolverSettings",
    "build_settings",
    "generate",
    "generate_pair",
    "heat_diffusion_attrs",
    "load_graph",
    "load_truth",
    "match",
    "match_files",
    "match_graphs",
    "matching_accuracy",
    "oracle_battery",
    "run_experiment",
    "run_oracles",
    "save_graph",
    "save_truth",
    "set_config",
]
