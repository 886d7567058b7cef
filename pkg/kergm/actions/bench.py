"""Benchmark experiments over sweeps of synthetic or file-based instances."""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from kergm.actions.config import ExperimentConfig, parse_grid_point
from kergm.core.errors import EXIT_INPUT, EXIT_ORACLE, KergmError
from kergm.core.graph import (
    AttributedGraph,
    GroundTruth,
    SyntheticConfig,
    generate_synthetic_pair,
    heat_diffusion_attrs,
    matching_accuracy,
)
from kergm.core.graph_io import load_graph, load_truth
from kergm.core.matcher import SolverSettings, match_graphs
from kergm.core.metadata import run_metadata, utc_timestamp
from kergm.core.oracles import oracle_battery
from kergm.core.utils import derive_seed

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment", "point", "trial", "seed", "accuracy", "objective", "seconds",
               "outer_iters", "status")


@dataclass
class ResultRow:
    experiment: str
    point: Any
    trial: int
    seed: int
    accuracy: Optional[float]
    objective: Optional[float]
    seconds: float
    outer_iters: int
    status: str
    perm: list[int] = field(default_factory=list)

    def csv_record(self) -> dict[str, Any]:
        record = asdict(self)
        record.pop("perm")
        return {k: "" if v is None else v for k, v in record.items()}


def trial_instance(
    cfg: ExperimentConfig, point: Any, seed: int
) -> tuple[AttributedGraph, AttributedGraph, Optional[GroundTruth], SolverSettings]:
    """Build the graphs, ground truth and solver settings of one trial."""
    synth = cfg.synthetic_base
    solver = cfg.solver.model_copy(update={"seed": seed})
    kind = cfg.experiment
    if cfg.grid is not None:
        point, synth["n_out"] = parse_grid_point(point)
    if kind == "accuracy_outliers":
        synth["n_out"] = int(point)
    elif kind == "accuracy_noise":
        synth["sigma"] = float(point)
    elif kind == "accuracy_density":
        synth["rho"] = float(point)
    elif kind == "scalability":
        synth["n_in"], synth["n_out"] = int(point), 0
    elif kind == "sensitivity_lambda":
        solver = solver.model_copy(update={"lam": float(point)})
    elif kind == "sensitivity_D":
        solver = solver.model_copy(update={"dim": int(point)})
    if kind == "match_files":
        g1, g2 = load_graph(cfg.g1), load_graph(cfg.g2)
        if cfg.heat:
            g1, g2 = heat_diffusion_attrs(g1, cfg.heat), heat_diffusion_attrs(g2, cfg.heat)
        truth = load_truth(cfg.truth) if cfg.truth else None
        return g1, g2, truth, solver
    g1, g2, truth = generate_synthetic_pair(SyntheticConfig(seed=seed, **synth))
    return g1, g2, truth, solver


def run_trial(cfg: ExperimentConfig, point: Any, trial: int) -> ResultRow:
    """Generate, match and score one trial; solver errors become the row status."""
    seed = derive_seed(cfg.seed, point, trial)
    try:
        if cfg.experiment == "oracle_battery":
            report = oracle_battery(seed=seed, sizes=[int(point)])
            passed = sum(c["passed"] for c in report["checks"])
            return ResultRow(cfg.experiment, point, trial, seed, passed / len(report["checks"]),
                             None, report["seconds"], 0, "ok" if report["passed"] else "failed")
        g1, g2, truth, solver = trial_instance(cfg, point, seed)
        result = match_graphs(g1, g2, solver)
    except KergmError as e:
        logger.warning("trial point=%s trial=%d failed: %s", point, trial, e)
        return ResultRow(cfg.experiment, point, trial, seed, None, None, 0.0, 0,
                         f"error:{type(e).__name__}")
    accuracy = matching_accuracy(result.perm, truth) if truth is not None else None
    return ResultRow(cfg.experiment, point, trial, seed, accuracy, result.objective,
                     result.total_seconds, result.outer_iterations, result.status,
                     [int(a) for a in result.perm])


def _run_job(job: tuple[ExperimentConfig, Any, int]) -> ResultRow:
    return run_trial(*job)


def collect_rows(cfg: ExperimentConfig) -> list[ResultRow]:
    """Run every (point, trial) job and return the rows in (point, trial) order."""
    jobs = [(cfg, point, trial) for point in cfg.points for trial in range(cfg.trials)]
    if cfg.workers == 1 or len(jobs) == 1:
        rows = []
        for job in jobs:
            rows.append(_run_job(job))
            logger.info("%s point=%s trial=%d status=%s", cfg.experiment, job[1], job[2],
                        rows[-1].status)
        return rows
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
        return list(pool.map(_run_job, jobs))


def write_csv(rows: list[ResultRow], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.csv_record())


def summarize(rows: list[ResultRow]) -> list[dict[str, Any]]:
    """Per-point mean accuracy and mean seconds over trials that produced a score."""
    summary: dict[Any, dict[str, Any]] = {}
    for row in rows:
        s = summary.setdefault(row.point, {"point": row.point, "trials": 0, "errors": 0,
                                           "accuracies": [], "seconds": []})
        s["trials"] += 1
        if row.status.startswith("error:"):
            s["errors"] += 1
            continue
        if row.accuracy is not None:
            s["accuracies"].append(row.accuracy)
        s["seconds"].append(row.seconds)
    out = []
    for s in summary.values():
        acc, sec = s.pop("accuracies"), s.pop("seconds")
        s["mean_accuracy"] = sum(acc) / len(acc) if acc else None
        s["mean_seconds"] = sum(sec) / len(sec) if sec else None
        out.append(s)
    return out


def run_experiment(cfg: ExperimentConfig, verify: bool = False) -> dict[str, Any]:
    """Run a benchmark and write ``<out>`` (CSV) and ``<out>.meta.json``.

    Args:
        cfg: Validated experiment configuration
        verify: Re-read the written results and recompute every accuracy;
            any mismatch turns the result into an error

    Returns:
        Dictionary with output paths and a per-point summary
    """
    started = utc_timestamp()
    out = Path(cfg.out)
    try:
        rows = collect_rows(cfg)
    except KergmError as e:
        return {"error": str(e), "action": "bench", "exit_code": e.exit_code}
    finished = utc_timestamp()
    meta_path = out.with_name(out.name + ".meta.json")
    perms_path = out.with_name(out.name + ".perms.json")
    summary = summarize(rows)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_csv(rows, out)
        meta = run_metadata(cfg.model_dump(mode="json"), started, finished)
        meta["summary"] = summary
        meta_path.write_text(json.dumps(meta, indent=2), encoding="utf-8")
        perms = [{"point": r.point, "trial": r.trial, "seed": r.seed, "perm": r.perm} for r in rows]
        perms_path.write_text(json.dumps(perms), encoding="utf-8")
    except OSError as e:
        return {"error": f"cannot write results: {e}", "action": "bench", "exit_code": EXIT_INPUT}
    if verify:
        mismatches = verify_results(cfg)
        if mismatches:
            logger.error("%d stored accuracies do not reproduce", len(mismatches))
            return {"error": f"{len(mismatches)} stored accuracies do not reproduce",
                    "action": "bench", "exit_code": EXIT_ORACLE, "mismatches": mismatches}
    return {
        "success": True,
        "action": "bench",
        "experiment": cfg.experiment,
        "verified": verify,
        "rows": len(rows),
        "errors": sum(1 for r in rows if r.status.startswith("error:")),
        "out": str(out),
        "meta": str(meta_path),
        "perms": str(perms_path),
        "summary": summary,
    }


def verify_results(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """Recompute every stored row's accuracy from its permutation and regenerated ground truth.

    Returns:
        Mismatching rows; empty when every row verifies
    """
    out = Path(cfg.out)
    perms = json.loads(out.with_name(out.name + ".perms.json").read_text(encoding="utf-8"))
    with out.open(newline="", encoding="utf-8") as f:
        records = list(csv.DictReader(f))
    mismatches = []
    for record, stored in zip(records, perms, strict=True):
        if record["accuracy"] == "" or not stored["perm"]:
            continue
        _, _, truth, _ = trial_instance(cfg, stored["point"], int(stored["seed"]))
        if truth is None:
            continue
        expected = matching_accuracy(stored["perm"], truth)
        if not math.isclose(expected, float(record["accuracy"]), rel_tol=0.0, abs_tol=1e-12):
            mismatches.append({"point": stored["point"], "trial": stored["trial"],
                               "stored": float(record["accuracy"]), "recomputed": expected})
    return mismatches
