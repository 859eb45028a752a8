"""Coordinate scenario loading, solving, simulation and reporting from the command line."""

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

# Add this directory to the path so sibling modules resolve from any working directory
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cloud_model import ModelError
from mdp_core import PreconditionError, SolverError, policy_evaluation
from progress import ProgressReporter
from provisioner import build_mdp, greedy_policy, mdp_policy, static_policy
from results_writer import TOOL_VERSION, write_results
from scenario_io import ScenarioValidationError, describe_configuration, load_scenario, spec_hash
from sim_harness import GENERATOR_NAME, generate_trace, simulate, summarize
from solver_config import build_settings
from utils import dump_json

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

POLICY_CHOICES = {
    "mdp": ("mdp",),
    "greedy": ("greedy",),
    "static": ("static",),
    "both": ("mdp", "greedy"),
    "all": ("mdp", "greedy", "static"),
}


class CliUsageError(Exception):
    """Bad command-line usage; argparse has already printed the usage text."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as exit code 1 instead of exiting with 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise CliUsageError(message)


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be a comma separated list of integers, got {text!r}") from None
    if not seeds or any(seed < 0 or seed >= 2**64 for seed in seeds):
        raise argparse.ArgumentTypeError("seeds must be unsigned 64-bit integers")
    # one result set per seed, first occurrence wins
    return list(dict.fromkeys(seeds))


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """Assemble the ``solve`` / ``simulate`` / ``compare`` command tree."""
    shared = _Parser(add_help=False)
    shared.add_argument("--scenario", required=True, help="Path to the scenario JSON file.")
    shared.add_argument(
        "--policy",
        choices=sorted(POLICY_CHOICES),
        default="both",
        help="Policies to simulate: mdp, greedy, static, both (mdp+greedy) or all. Default: both",
    )
    shared.add_argument("--epochs", type=_positive_int, default=10_000, help="Epochs per trace. Default: 10000")
    shared.add_argument("--seeds", type=_parse_seeds, default=[1], help="Comma separated trace seeds. Default: 1")
    shared.add_argument("--initial-level", default=None, help="Demand level of epoch 0. Default: first level")
    shared.add_argument("--out", default="out", help="Output directory. Default: ./out")
    shared.add_argument("--gamma", type=float, default=None, help="Discount factor overriding the scenario's.")
    shared.add_argument("--tolerance", type=float, default=1e-9, help="Policy evaluation residual. Default: 1e-9")
    shared.add_argument("--state-cap", type=_positive_int, default=None, help="Configuration enumeration cap.")
    shared.add_argument("--digits", type=_positive_int, default=None, help="Significant digits kept in JSON reals. Default: 9")
    shared.add_argument("--workers", type=_positive_int, default=1, help="Processes for seed-parallel runs. Default: 1")
    shared.add_argument("--quiet", action="store_true", help="Suppress progress lines on stdout.")

    parser = _Parser(
        prog="provisioning",
        description="Solve vehicular-cloud VM provisioning as an MDP and compare it with the greedy heuristic.",
    )
    commands = parser.add_subparsers(dest="command", metavar="{solve,simulate,compare}", parser_class=_Parser)
    commands.required = True
    commands.add_parser("solve", parents=[shared], help="Write the optimal policy and value function as JSON.")
    commands.add_parser("simulate", parents=[shared], help="Run the selected policies over seeded traces.")
    commands.add_parser("compare", parents=[shared], help="Solve, simulate mdp and greedy, and summarize.")
    return parser


def _run_seed(spec, index, policies, epochs, seed, initial_level, out_dir, metadata, digits):
    """Simulate every policy on one seeded trace and write its result set."""
    trace = generate_trace(spec.demand_model, epochs, seed, initial_level)
    results = [simulate(policy, index, spec, trace, label=label) for label, policy in policies.items()]
    summary = summarize(results)
    paths = write_results(
        results, summary, out_dir, metadata={**metadata, "seed": seed}, tag=f"seed{seed}", digits=digits
    )
    return seed, {result.policy_label: result.cumulative_migrations for result in results}, paths


def write_policy_report(spec, mdp, index, solved, greedy, out_dir: Path, metadata: dict, digits: int) -> Path:
    """Write ``policy.json``: per state, the optimal and greedy targets with their values."""
    greedy_values = policy_evaluation(mdp, greedy)
    states = []
    for state in range(index.num_states):
        config_index, level_index = index.pair_of(state)
        states.append(
            {
                "state": state,
                "configuration": describe_configuration(spec, index.configurations[config_index]),
                "demand_level": index.levels[level_index].id,
                "mdp_target": solved.policy[state],
                "greedy_target": greedy[state],
                "value": solved.values[state],
                "greedy_value": greedy_values[state],
            }
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "policy.json"
    path.write_text(dump_json({"metadata": metadata, "states": states}, digits), encoding="utf-8")
    return path


def run_pipeline(args) -> int:
    """Execute one subcommand end to end and return its exit code.

    Args:
        args: Parsed namespace from ``build_parser``.
    Goal:
        Load and validate the scenario, solve it, simulate the requested
        policies over every seed and write the artifacts.
    Returns:
        EXIT_OK on success.
    Raises:
        ScenarioValidationError, ModelError, PreconditionError, OSError.
    """
    if args.gamma is not None and not 0.0 <= args.gamma < 1.0:
        raise PreconditionError(f"--gamma must lie in [0, 1), got {args.gamma}")
    if not args.tolerance > 0:
        raise PreconditionError(f"--tolerance must be positive, got {args.tolerance}")

    overrides = {}
    if args.state_cap:
        overrides["state_space_cap"] = args.state_cap
    if args.digits:
        overrides["significant_digits"] = args.digits
    settings = build_settings(args.tolerance, **overrides)
    spec = load_scenario(args.scenario, settings)
    if args.gamma is not None:
        spec = dataclasses.replace(spec, discount=args.gamma)
    initial_level = args.initial_level or spec.demand_model.levels[0].id
    spec.demand_model.level_index(initial_level)

    out_dir = Path(args.out)
    metadata = {
        "generator": GENERATOR_NAME,
        "numpy_version": np.__version__,
        "spec_hash": spec_hash(spec),
        "tool_version": TOOL_VERSION,
        "epochs": args.epochs,
        "initial_level": initial_level,
        "discount": spec.discount,
    }
    reporter = ProgressReporter(total=len(args.seeds), label=args.command, enabled=not args.quiet)

    mdp, index = build_mdp(spec, settings)
    reporter.note(f"compiled {index.num_states} states ({index.num_configurations} configurations x {index.num_levels} levels)")
    greedy = greedy_policy(spec, index)
    if args.command == "simulate":
        labels = POLICY_CHOICES[args.policy]
    else:
        # compare always runs mdp and greedy; solve only needs the optimum
        labels = POLICY_CHOICES["all" if args.policy == "all" else "both"]

    solved = None
    if args.command == "solve" or "mdp" in labels:
        solved = mdp_policy(spec, settings=settings, built=(mdp, index))
        reporter.note("policy iteration converged")
    if args.command in ("solve", "compare"):
        path = write_policy_report(spec, mdp, index, solved, greedy, out_dir, metadata, settings.significant_digits)
        reporter.note(f"wrote {path}")
    if args.command == "solve":
        return EXIT_OK

    builders = {"mdp": lambda: solved.policy, "greedy": lambda: greedy, "static": lambda: static_policy(spec, index)}
    policies = {label: builders[label]() for label in labels}
    jobs = [
        (spec, index, policies, args.epochs, seed, initial_level, out_dir, metadata, settings.significant_digits)
        for seed in args.seeds
    ]

    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = pool.map(_run_seed, *zip(*jobs))
            for seed, migrations, _ in outcomes:
                reporter.advance(f"seed {seed} {_describe(migrations)}")
    else:
        for job in jobs:
            seed, migrations, _ = _run_seed(*job)
            reporter.advance(f"seed {seed} {_describe(migrations)}")
    reporter.complete()
    return EXIT_OK


def _describe(migrations: dict) -> str:
    return " ".join(f"{label}={count}" for label, count in migrations.items())


def run_cli(argv: list[str] | None = None) -> int:
    """Parse arguments, run the requested subcommand and map failures to exit codes.

    Exit 0 on success, 1 on usage or validation errors, 2 on I/O errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv if argv is not None else sys.argv[1:])
    except CliUsageError:
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    try:
        return run_pipeline(args)
    except (ScenarioValidationError, ModelError, PreconditionError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"internal solver error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv: list[str] | None = None):
    """Entry point used by the wrapper scripts."""
    sys.exit(run_cli(argv))


if __name__ == "__main__":
    main()
