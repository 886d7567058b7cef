"""Graph-file matching action."""

import json
import logging
from pathlib import Path
from typing import Any, Optional, Sequence

from kergm.core.errors import EXIT_INPUT, KergmError
from kergm.core.graph import heat_diffusion_attrs, matching_accuracy
from kergm.core.graph_io import load_graph, load_truth
from kergm.core.matcher import SolverSettings, match_graphs

logger = logging.getLogger(__name__)


def match_files(
    g1_path: str,
    g2_path: str,
    settings: Optional[SolverSettings] = None,
    heat: Optional[Sequence[float]] = None,
    truth_path: Optional[str] = None,
    out: Optional[str] = None,
    include_trace: bool = False,
) -> dict[str, Any]:
    """Match two graph files.

    Args:
        g1_path: First graph (JSON)
        g2_path: Second graph (JSON)
        settings: Solver settings
        heat: Diffusion times; when given, both graphs get heat-kernel edge attributes
        truth_path: Optional ground-truth file to score the result against
        out: Optional path for the result JSON
        include_trace: Include per-iteration records of every alpha stage

    Returns:
        Dictionary with the permutation over the padded size, J_gm at it,
        flagged dummy assignments and per-alpha diagnostics
    """
    try:
        g1, g2 = load_graph(g1_path), load_graph(g2_path)
        if heat:
            g1, g2 = heat_diffusion_attrs(g1, heat), heat_diffusion_attrs(g2, heat)
        result = match_graphs(g1, g2, settings)
        payload: dict[str, Any] = {"success": True, "action": "match", **result.to_dict(include_trace)}
        if truth_path:
            payload["accuracy"] = matching_accuracy(result.perm, load_truth(truth_path))
    except KergmError as e:
        logger.debug("match failed", exc_info=True)
        return {"error": str(e), "action": "match", "exit_code": e.exit_code,
                "error_type": type(e).__name__}
    if out:
        try:
            Path(out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
        except OSError as e:
            return {"error": f"cannot write {out}: {e}", "action": "match", "exit_code": EXIT_INPUT}
        payload["output"] = out
    return payload
