"""Command line interface.

Subcommands:

* ``run <config.json>``    grid-search and run a single-instance experiment
* ``multi <config.json>``  multi-instance protocol (instance_count games)
* ``verify``               run the built-in oracle suite, print a table
* ``plot <summaryDir>``    emit panel data files and a plotting script

``run`` and ``multi`` also accept a previously written manifest.json, in
which case the recorded experiment is replayed with its chosen step sizes
pinned (byte-identical CSV output). Exit codes: 0 success, 1 failed
invariant or runtime error, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .core import ConfigurationError, InputError
from .harness import (
    config_from_dict,
    emit_plot_data,
    multi_instance_experiment,
    replay_manifest,
    run_experiment,
)
from .verify import run_all


def _apply_overrides(doc: dict, args) -> dict:
    if args.epochs is not None:
        doc["epochs"] = args.epochs
    if args.seed is not None:
        doc["seeds"] = [args.seed]
    if args.out is not None:
        doc["out_dir"] = args.out
    if args.method is not None:
        doc["methods"] = [args.method]
    if args.schedule is not None:
        doc["schedules"] = [args.schedule]
    if args.gamma is not None:
        doc["gamma_grid"] = [args.gamma]
    return doc


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc


def _cmd_experiment(args, multi: bool) -> int:
    doc = _load_json(args.config)
    if "manifest_version" in doc:
        manifest = replay_manifest(args.config, out_dir=args.out, workers=args.workers)
    else:
        cfg = config_from_dict(_apply_overrides(doc, args))
        runner = multi_instance_experiment if multi else run_experiment
        manifest = runner(cfg, workers=args.workers)
    out_dir = manifest["config"]["out_dir"]
    chosen = {
        str(info["index"]): info["chosen_gamma"] for info in manifest["instances"]
    }
    print(f"wrote runs.csv, summary.csv, manifest.json to {out_dir}")
    print(f"chosen gamma: {json.dumps(chosen)}")
    skipped = [m for info in manifest["instances"] for m in info["skipped_methods"]]
    if skipped:
        print(f"warning: no stable gamma found for: {sorted(set(skipped))}",
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minimax-wor",
        description="Without-replacement stochastic gradient experiments "
        "for finite-sum minimax problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "single-instance experiment from a config (or manifest) file"),
        ("multi", "multi-instance experiment from a config (or manifest) file"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to config.json or manifest.json")
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--seed", type=int, default=None,
                       help="replace the seed list with this single seed")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--method", type=str, default=None,
                       choices=("gda", "ppm", "agda"))
        p.add_argument("--schedule", type=str, default=None,
                       help="e.g. rr, so, ig, uniform, as:greedy_max_dist")
        p.add_argument("--gamma", type=float, default=None,
                       help="pin the step-size multiplier (skips the grid)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: env MINIMAX_WOR_WORKERS)")

    sub.add_parser("verify", help="run the oracle suite and print a pass/fail table")

    p_plot = sub.add_parser("plot", help="emit plot data files from a summary dir")
    p_plot.add_argument("summary_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_experiment(args, multi=False)
        if args.command == "multi":
            return _cmd_experiment(args, multi=True)
        if args.command == "verify":
            return 1 if run_all() else 0
        if args.command == "plot":
            for path in emit_plot_data(args.summary_dir):
                print(f"wrote {path}")
            return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
