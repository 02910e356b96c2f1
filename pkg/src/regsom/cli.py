"""Command-line interface.

Subcommands mirror the pipeline stages (synth, ingest, features, train,
cluster, mca, cda, report) plus an all-in-one `run`. Exit codes: 0 success,
2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from datetime import date

from . import register, report, synth
from .errors import ConfigError, DataError, NumericalError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regsom",
        description="Kohonen-map segmentation pipeline for unemployment "
                    "register data")
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic register cohort")
    p.add_argument("--region", default="nord",
                   help="bundled spec to use (nord or rhone)")
    p.add_argument("--spec", help="path to a cohort spec file")
    p.add_argument("--cohort-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--validate", action="store_true",
                   help="print the calibration report")
    p.add_argument("--out", required=True, help="output register csv")

    p = sub.add_parser("ingest", help="impute and collate a register file")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output individuals csv")
    p.add_argument("--window-end", default="1996-08-31")

    p = sub.add_parser("features", help="build the 11 classification variables")
    p.add_argument("--individuals", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the self-organizing map")
    p.add_argument("--features", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--assignment-out", required=True)
    p.add_argument("--rows", type=int, default=10)
    p.add_argument("--cols", type=int, default=10)
    p.add_argument("--steps", type=int)
    p.add_argument("--eps0", type=float, default=0.5)
    p.add_argument("--eps-min", type=float, default=0.01)
    p.add_argument("--radius0", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("cluster", help="Ward super-classes of the code vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--tree-out", required=True)
    p.add_argument("--superclasses-out", required=True)
    p.add_argument("--connectivity-out", required=True)

    p = sub.add_parser("mca", help="correspondence analysis of the profiles")
    p.add_argument("--individuals", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--superclasses", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--active", default=",".join(register.ACTIVE_VARS))
    p.add_argument("--supplementary", default="age")

    p = sub.add_parser("cda", help="canonical discriminant analysis")
    p.add_argument("--features", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--superclasses", required=True)
    p.add_argument("--outdir", required=True)

    p = sub.add_parser("report", help="profile, composition tables and plate")
    p.add_argument("--individuals", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--superclasses", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--outdir", required=True)

    p = sub.add_parser("run", help="run the whole pipeline")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--outdir")
    p.add_argument("--seed", type=int)
    p.add_argument("--region")
    p.add_argument("--cohort-size", type=int)
    return parser


def _cmd_synth(args) -> None:
    spec = synth.load_spec(args.spec) if args.spec \
        else synth.bundled_spec(args.region)
    overrides = {}
    if args.cohort_size is not None:
        overrides["cohort_size"] = args.cohort_size
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    records = synth.generate(spec)
    register.write_records(records, args.out)
    if args.validate:
        print(synth.validate(records, spec).format_text(), end="")


def _cmd_run(args) -> None:
    config = report.read_config(args.config) if args.config \
        else report.PipelineConfig()
    for setting in args.set:
        key, sep, value = setting.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {setting!r}")
        report.apply_setting(config, key.strip(), value.strip())
    if args.outdir is not None:
        config.outdir = args.outdir
    if args.seed is not None:
        config.seed = args.seed
    if args.region is not None:
        config.region = args.region
    if args.cohort_size is not None:
        config.cohort_size = args.cohort_size
    config.validate()
    manifest = report.run_pipeline(config)
    print(manifest)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "synth":
            _cmd_synth(args)
        elif args.command == "ingest":
            report.stage_ingest(args.input, args.out,
                                date.fromisoformat(args.window_end))
        elif args.command == "features":
            report.stage_features(args.individuals, args.out)
        elif args.command == "train":
            config = report.PipelineConfig(
                grid_rows=args.rows, grid_cols=args.cols,
                total_steps=args.steps, eps0=args.eps0, eps_min=args.eps_min,
                radius0=args.radius0, seed=args.seed)
            config.validate()
            report.stage_train(args.features, args.model_out,
                               args.assignment_out, config)
        elif args.command == "cluster":
            report.stage_cluster(args.model, args.tree_out,
                                 args.superclasses_out, args.connectivity_out,
                                 args.k)
        elif args.command == "mca":
            active = tuple(v.strip() for v in args.active.split(",")
                           if v.strip())
            os.makedirs(args.outdir, exist_ok=True)
            report.stage_mca(args.individuals, args.features, args.assignment,
                             args.superclasses, args.outdir, active,
                             args.supplementary or None)
        elif args.command == "cda":
            os.makedirs(args.outdir, exist_ok=True)
            report.stage_cda(args.features, args.assignment,
                             args.superclasses, args.outdir)
        elif args.command == "report":
            os.makedirs(args.outdir, exist_ok=True)
            report.stage_report(args.individuals, args.features,
                                args.assignment, args.superclasses,
                                args.model, args.outdir)
        elif args.command == "run":
            _cmd_run(args)
    except ConfigError as exc:
        print(f"regsom: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"regsom: data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"regsom: numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
