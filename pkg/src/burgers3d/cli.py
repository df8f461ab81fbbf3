"""Command-line entry point.

Subcommands:
    run <config>        execute the experiment named in the config
    validate <config>   parse the config, list every violation or echo it
    report <dir>        re-run the analysis checks on a stored trajectory
    list                show available experiments
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments, spectral, trajio
from .config import EXPERIMENTS, spec_with_overrides, validate_config
from .experiments import EXPERIMENT_SUMMARIES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="burgers3d",
        description="Pseudo-spectral solver and estimate-verification harness "
        "for the diffusive 3D Burgers equations on the torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment end to end")
    run.add_argument("config", help="experiment config file")
    run.add_argument("--experiment", help="override the experiment name", choices=EXPERIMENTS)
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--threads", type=int, help="FFT worker threads (default: all cores)")
    run.add_argument(
        "--strict",
        action="store_true",
        help="fail ratio-mode checks whose max ratio exceeds the configured limit",
    )

    val = sub.add_parser("validate", help="check a config file and echo the resolved form")
    val.add_argument("config")

    rep = sub.add_parser("report", help="re-run analysis on a stored trajectory directory")
    rep.add_argument("trajectory", help="directory written by a previous run")
    rep.add_argument("--out", help="where to put the reports (default <trajectory>/reports)")
    rep.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    sub.add_parser("list", help="list available experiments")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "list":
        for name in EXPERIMENTS:
            print(f"{name:22s} {EXPERIMENT_SUMMARIES[name]}")
        return 0

    if args.command == "validate":
        spec, errors = validate_config(args.config)
        if errors:
            for err in errors:
                print(f"error: {err}", file=sys.stderr)
            return 1
        echo = {
            "experiment": spec.name or "(none)",
            "run_config": trajio.config_to_dict(spec.run),
            "output_directory": spec.directory,
        }
        print(json.dumps(echo, indent=2, sort_keys=True, default=str))
        return 0

    if args.command == "report":
        return experiments.reanalyze_trajectory(
            args.trajectory, out=args.out, figures_on=not args.no_figures
        )

    # run
    spec, errors = validate_config(args.config)
    if errors:
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        return 1
    spec = spec_with_overrides(spec, seed=args.seed, out=args.out, name=args.experiment)
    if not spec.name:
        print("error: no experiment named; set [experiment] name or pass --experiment", file=sys.stderr)
        return 1
    if args.threads is not None:
        spectral._WORKERS = max(1, args.threads)
    status = experiments.run_experiment(spec, strict=args.strict)
    print(f"{spec.name}: exit status {status}; artifacts in {spec.directory}")
    return status


if __name__ == "__main__":
    sys.exit(main())
