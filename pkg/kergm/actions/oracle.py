"""Oracle battery action."""

from typing import Any, Sequence

from kergm.core.errors import EXIT_ORACLE, KergmError
from kergm.core.oracles import DEFAULT_SIZES, oracle_battery


def run_oracles(
    seed: int = 0,
    sizes: Sequence[int] = DEFAULT_SIZES,
    gradient_perturbation: float = 0.0,
) -> dict[str, Any]:
    """Run the oracle battery.

    Args:
        seed: Instance seed
        sizes: Graph sizes to check
        gradient_perturbation: Offset added to the analytic gradient (negative control)

    Returns:
        Dictionary with every check; carries ``error`` and exit code 4 when any fails
    """
    try:
        report = oracle_battery(seed, sizes, gradient_perturbation)
    except KergmError as e:
        return {"error": str(e), "action": "oracle", "exit_code": e.exit_code}
    if not report["passed"]:
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        return {"error": f"{len(failed)} oracle check(s) failed: {', '.join(failed)}",
                "action": "oracle", "exit_code": EXIT_ORACLE, **report}
    return {"success": True, "action": "oracle", **report}
