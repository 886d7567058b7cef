"""CLI implementation for instance generation, matching, benchmarks and oracle checks."""

import argparse
import json
import logging
import sys
from typing import Any, NoReturn

from kergm.actions import (
    bench as bench_actions,
    config as config_actions,
    generate as generate_actions,
    match as match_actions,
    oracle as oracle_actions,
)
from kergm.core.errors import EXIT_OK, EXIT_USAGE, KergmError
from kergm.core.matcher import build_settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class KergmArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _number_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def print_result(result: dict[str, Any], as_json: bool = False):
    """Print action result."""
    if as_json:
        print(json.dumps(result, indent=2, default=str))
        return
    if not result.get("success"):
        print(f"❌ Error: {result.get('error', 'Unknown error')}")
        for check in result.get("checks", []):
            if not check["passed"]:
                print(f"   {check['name']}: {check['value']:.3g} > {check['threshold']:g} {check['detail']}")
        return
    print(f"✅ {result.get('action', 'Action')} completed successfully")
    if "files" in result:
        for name, path in result["files"].items():
            print(f"   {name}: {path}")
    if "perm" in result:
        print(f"   Permutation: {result['perm']}")
        print(f"   Objective: {result['objective']:.10g}")
        print(f"   Status: {result['status']} ({result['outer_iterations']} outer iterations)")
        if result.get("dummy_assignments"):
            print(f"   Dummy assignments: {result['dummy_assignments']}")
    if "accuracy" in result:
        print(f"   Accuracy: {result['accuracy']:.4f}")
    if "summary" in result:
        print(f"   Rows: {result['rows']} ({result['errors']} errors) -> {result['out']}")
        for s in result["summary"]:
            acc = "n/a" if s["mean_accuracy"] is None else f"{s['mean_accuracy']:.4f}"
            print(f"   point={s['point']}: accuracy={acc} trials={s['trials']}")
    if "checks" in result:
        print(f"   Checks passed: {len(result['checks'])} in {result['seconds']:.1f}s")
    if "config" in result:
        print(json.dumps(result["config"], indent=2))


def _finish(result: dict[str, Any], as_json: bool) -> NoReturn:
    print_result(result, as_json)
    sys.exit(EXIT_OK if result.get("success") else result.get("exit_code", EXIT_USAGE))


def _solver_flags(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "lam": args.lam,
        "alpha_grid": args.alpha_grid,
        "backend": args.backend,
        "dim": args.dim,
        "gamma": args.gamma,
        "discretize": args.discretize,
    }


def handle_gen_command(args: argparse.Namespace):
    """Handle gen command."""
    result = generate_actions.generate(
        out_prefix=args.out,
        n_in=args.n_in,
        n_out=args.n_out,
        rho=args.rho,
        sigma=args.sigma,
        seed=args.seed,
    )
    _finish(result, args.json)


def handle_match_command(args: argparse.Namespace):
    """Handle match command."""
    try:
        file_solver = {}
        if args.config:
            file_solver = config_actions.load_config_file(args.config).get("solver", {})
        flags = {k: v for k, v in _solver_flags(args).items() if v is not None}
        if args.seed is not None:
            flags["seed"] = args.seed
        settings = build_settings(None, **{**file_solver, **flags})
    except KergmError as e:
        _finish({"error": str(e), "action": "match", "exit_code": e.exit_code}, args.json)
    result = match_actions.match_files(
        args.g1, args.g2, settings,
        heat=args.heat,
        truth_path=args.truth,
        out=args.out,
        include_trace=args.trace,
    )
    _finish(result, args.json)


def handle_bench_command(args: argparse.Namespace):
    """Handle bench command."""
    resolved = config_actions.set_config(
        config_path=args.config,
        experiment=args.experiment,
        sweep=args.sweep,
        trials=args.trials,
        seed=args.seed,
        out=args.out,
        workers=args.workers,
        lam=args.lam,
        alpha_grid=args.alpha_grid,
        backend=args.backend,
        dim=args.dim,
        gamma=args.gamma,
        discretize=args.discretize,
        n_out_grid=args.n_out_grid,
    )
    if not resolved.get("success"):
        _finish(resolved, args.json)
    cfg = config_actions.ExperimentConfig(**resolved["config"])
    _finish(bench_actions.run_experiment(cfg, verify=args.verify), args.json)


def handle_oracle_command(args: argparse.Namespace):
    """Handle oracle command."""
    result = oracle_actions.run_oracles(
        seed=args.seed,
        sizes=args.sizes,
        gradient_perturbation=args.perturb_gradient,
    )
    _finish(result, args.json)


def _add_solver_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--lambda", dest="lam", type=float, help="Entropy weight (default 0.005)")
    parser.add_argument("--alpha-grid", help="Path-following grid, e.g. 0:0.1:1 or 0,0.5,1")
    parser.add_argument("--backend", choices=["exact", "rff"], help="Edge-kernel backend")
    parser.add_argument("--dim", type=int, help="Random Fourier feature dimension D")
    parser.add_argument("--gamma", type=float, help="Gaussian edge-kernel bandwidth")
    parser.add_argument("--discretize", choices=["hungarian", "greedy"], help="Discretization")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--json", action="store_true", help="Output as JSON")


def create_parser() -> argparse.ArgumentParser:
    """Create CLI argument parser."""
    parser = KergmArgumentParser(
        prog="kergm",
        description="Kernelized graph matching solver and benchmark harness"
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging on stderr")

    subparsers = parser.add_subparsers(dest="mode", help="Mode of operation")

    gen_parser = subparsers.add_parser("gen", help="Generate a synthetic graph pair")
    gen_parser.add_argument("--n-in", type=int, default=50, help="Inlier nodes")
    gen_parser.add_argument("--n-out", type=int, default=0, help="Outlier nodes per graph")
    gen_parser.add_argument("--rho", type=float, default=1.0, help="Edge density")
    gen_parser.add_argument("--sigma", type=float, default=0.0, help="Edge attribute noise")
    gen_parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    gen_parser.add_argument("--out", required=True, help="Output prefix for the JSON files")
    gen_parser.add_argument("--json", action="store_true", help="Output as JSON")

    match_parser = subparsers.add_parser("match", help="Match two graph files")
    match_parser.add_argument("g1", help="First graph (JSON)")
    match_parser.add_argument("g2", help="Second graph (JSON)")
    match_parser.add_argument("--heat", type=_number_list,
                              help="Heat-diffusion times for edge attributes, e.g. 5,10,15,20")
    match_parser.add_argument("--truth", help="Ground-truth file to score against")
    match_parser.add_argument("--out", help="Write the result JSON here")
    match_parser.add_argument("--trace", action="store_true", help="Include per-iteration records")
    _add_solver_arguments(match_parser)

    bench_parser = subparsers.add_parser("bench", help="Run a benchmark experiment")
    bench_parser.add_argument("--experiment", choices=list(config_actions.DEFAULT_SWEEPS),
                              help="Experiment kind")
    bench_parser.add_argument("--sweep", type=_number_list, help="Sweep values, comma-separated")
    bench_parser.add_argument("--trials", type=int, help="Trials per sweep point")
    bench_parser.add_argument("--out", help="CSV output path")
    bench_parser.add_argument("--workers", type=int, help="Parallel trial workers")
    bench_parser.add_argument("--n-out-grid", type=_int_list,
                              help="Outlier counts for sensitivity experiments, comma-separated")
    bench_parser.add_argument("--verify", action="store_true",
                              help="Recompute stored accuracies after the run; mismatches exit with 4")
    _add_solver_arguments(bench_parser)

    oracle_parser = subparsers.add_parser("oracle", help="Run the oracle battery")
    oracle_parser.add_argument("--seed", type=int, default=0, help="Instance seed")
    oracle_parser.add_argument("--sizes", type=_int_list, default=[4, 5, 6],
                               help="Graph sizes, comma-separated (each at most 8)")
    oracle_parser.add_argument("--perturb-gradient", type=float, default=0.0,
                               help="Offset added to the analytic gradient (negative control)")
    oracle_parser.add_argument("--json", action="store_true", help="Output as JSON")

    return parser


def main(argv: list[str] | None = None):
    """Main CLI entry point."""
    parser = create_parser()
    args = parser.parse_args(argv)

    if not args.mode:
        parser.print_help()
        sys.exit(EXIT_USAGE)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format=LOG_FORMAT, stream=sys.stderr)

    try:
        if args.mode == "gen":
            handle_gen_command(args)
        elif args.mode == "match":
            handle_match_command(args)
        elif args.mode == "bench":
            handle_bench_command(args)
        elif args.mode == "oracle":
            handle_oracle_command(args)
        else:
            parser.print_help()
            sys.exit(EXIT_USAGE)
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        sys.exit(130)
    except KergmError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_USAGE)
