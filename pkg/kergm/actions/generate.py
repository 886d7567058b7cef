"""Synthetic pair generation action."""

from pathlib import Path
from typing import Any

from pydantic import ValidationError

from kergm.core.errors import EXIT_INPUT, EXIT_USAGE, KergmError
from kergm.core.graph import SyntheticConfig, generate_synthetic_pair
from kergm.core.graph_io import save_graph, save_truth


def generate(
    out_prefix: str,
    n_in: int = 50,
    n_out: int = 0,
    rho: float = 1.0,
    sigma: float = 0.0,
    seed: int = 0,
) -> dict[str, Any]:
    """Write a synthetic pair and its ground truth as JSON files.

    Args:
        out_prefix: Files are written to ``<prefix>.g1.json``, ``<prefix>.g2.json``
            and ``<prefix>.truth.json``
        n_in: Inlier count
        n_out: Outlier count per graph
        rho: Edge density
        sigma: Attribute noise standard deviation
        seed: RNG seed

    Returns:
        Dictionary with the written paths and graph sizes
    """
    try:
        cfg = SyntheticConfig(n_in=n_in, n_out=n_out, rho=rho, sigma=sigma, seed=seed)
    except ValidationError as e:
        return {"error": f"invalid generator parameters: {e.errors()[0]['msg']}",
                "action": "gen", "exit_code": EXIT_USAGE}
    try:
        g1, g2, truth = generate_synthetic_pair(cfg)
        prefix = Path(out_prefix)
        paths = {
            "g1": save_graph(g1, prefix.with_name(prefix.name + ".g1.json")),
            "g2": save_graph(g2, prefix.with_name(prefix.name + ".g2.json")),
            "truth": save_truth(truth, prefix.with_name(prefix.name + ".truth.json")),
        }
    except (KergmError, OSError) as e:
        return {"error": str(e), "action": "gen",
                "exit_code": getattr(e, "exit_code", EXIT_INPUT)}
    return {
        "success": True,
        "action": "gen",
        "files": {k: str(v) for k, v in paths.items()},
        "n": g1.n,
        "m1": g1.m,
        "m2": g2.m,
        "seed": seed,
    }
