#!/usr/bin/env python3
"""
Deep exploration for recommender systems.

Command-line entry point: train agents over seeded sweeps, evaluate frozen
checkpoints on held-out users, aggregate and plot record files, and check
the tabular case-study claims.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from src.casestudy.claims import CLAIMS, run_claims
from src.config.experiment_config import load_experiment_config
from src.core.errors import ConfigError, DeepExplorationError, ValidationError
from src.harness.aggregate import aggregate, write_aggregate
from src.harness.evaluate import evaluate_frozen
from src.harness.plotting import emit_plot
from src.harness.runner import run_experiment


logger = logging.getLogger("deep_exploration")

EXIT_FAILURE = 1
EXIT_INVALID = 2


def cmd_run(args) -> int:
    config = load_experiment_config(args.config, args.defaults)
    result = run_experiment(config, args.out)
    print(result.metrics.to_text(), end="")
    return EXIT_FAILURE if result.failures else 0


def cmd_eval(args) -> int:
    config = load_experiment_config(args.config, args.defaults)
    table, _ = evaluate_frozen(args.checkpoint, config, args.life_cycles)
    print(table.to_text(), end="")
    if args.out:
        write_aggregate(table, args.out)
    return 0


def cmd_aggregate(args) -> int:
    table = aggregate(args.csv)
    print(table.to_text(), end="")
    write_aggregate(table, args.out)
    return 0


def cmd_plot(args) -> int:
    emit_plot(args.csv, args.out)
    return 0


def cmd_casestudy(args) -> int:
    report = run_claims(args.claim, args.seed, args.trials)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        logger.info("Wrote %s", out)
    print(text, end="")
    return 0 if all(entry["passed"] for entry in report.values()) else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deep-exploration", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train every agent of a config over its seeds")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--defaults", type=Path, help="TOML file with site-wide [agent_defaults]")
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="roll out a checkpoint on the config's evaluation roster")
    ev.add_argument("--checkpoint", required=True, type=Path)
    ev.add_argument("--config", required=True, type=Path)
    ev.add_argument("--life-cycles", type=int)
    ev.add_argument("--out", type=Path)
    ev.add_argument("--defaults", type=Path)
    ev.set_defaults(func=cmd_eval)

    agg = sub.add_parser("aggregate", help="mean and standard error per agent across seeds")
    agg.add_argument("csv", nargs="+", type=Path)
    agg.add_argument("--out", type=Path)
    agg.set_defaults(func=cmd_aggregate)

    plot = sub.add_parser("plot", help="SVG learning curves from records CSVs")
    plot.add_argument("csv", nargs="+", type=Path)
    plot.add_argument("--out", required=True, type=Path)
    plot.set_defaults(func=cmd_plot)

    case = sub.add_parser("casestudy", help="Monte Carlo checks of the tabular claims")
    case.add_argument("--claim", default="all", choices=[*CLAIMS, "all"])
    case.add_argument("--seed", type=int, default=0)
    case.add_argument("--trials", type=int)
    case.add_argument("--out", type=Path)
    case.set_defaults(func=cmd_casestudy)
    return parser


def main(argv=None) -> int:
    """Main application entry point"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    except DeepExplorationError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
