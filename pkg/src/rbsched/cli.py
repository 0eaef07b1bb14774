"""Command-line entry point: ``rbsched {train,eval,baseline,export,config}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import harness
from .env import ConfigError
from .schedulers import SchedulerKind

BASELINES = [k.value for k in SchedulerKind if k is not SchedulerKind.DDPG]


def _run_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", help="JSON run configuration (defaults if omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--trace", action="store_true", help="write the per-step event trace CSV")
    p.add_argument("--parallel-seeds", type=int, default=1, metavar="N",
                   help="run N independent seeds, one subdirectory each")
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbsched", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    _run_parser(sub, "train", "train the DDPG scheduler")
    p = _run_parser(sub, "eval", "evaluate a trained model on fresh episodes")
    p.add_argument("--model", required=True)
    p = _run_parser(sub, "baseline", "run a model-based scheduler")
    p.add_argument("--scheduler", choices=BASELINES)

    p = sub.add_parser("export", help="normalised cumulative histograms from metrics CSVs")
    p.add_argument("inputs", nargs="+", help="metrics CSV files")
    p.add_argument("--metric", default="all", choices=["all", *harness.METRICS])
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("config", help="print the resolved configuration")
    p.add_argument("--config")
    return ap


def _resolve(args) -> config_mod.RunConfig:
    cfg = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "episodes", None) is not None:
        cfg.episodes = args.episodes
    if getattr(args, "out", None) is not None:
        cfg.output_dir = args.out
    if getattr(args, "scheduler", None) is not None:
        cfg.scheduler = SchedulerKind(args.scheduler)
    cfg.validate()
    return cfg


def _export(args) -> int:
    records = []
    for path in args.inputs:
        records += harness.read_records(path)
    if args.bins < 1:
        raise harness.HarnessError("--bins must be >= 1")
    metrics = harness.METRICS if args.metric == "all" else [args.metric]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for metric in metrics:
        rows = harness.export_cumulative_histogram(records, metric, args.bins)
        harness.write_histogram_csv(out / f"histogram_{metric}.csv", rows)
    return 0


def cli_main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        if args.command == "export":
            return _export(args)
        cfg = _resolve(args)
        if args.command == "config":
            sys.stdout.write(config_mod.dumps(cfg))
            return 0
        mode = {"train": harness.Mode.TRAIN, "eval": harness.Mode.EVALUATE,
                "baseline": harness.Mode.BASELINE}[args.command]
        if mode is harness.Mode.BASELINE and cfg.scheduler is SchedulerKind.DDPG:
            raise harness.HarnessError("baseline needs --scheduler (one of " + ", ".join(BASELINES) + ")")
        model = getattr(args, "model", None)
        if args.parallel_seeds > 1:
            harness.run_parallel_seeds(cfg, mode, args.parallel_seeds, model, args.trace)
        else:
            harness.run(cfg, mode, model, args.trace)
        return 0
    except (ConfigError, harness.HarnessError, OSError, ValueError) as exc:
        print(f"rbsched: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())
