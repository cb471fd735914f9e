"""Command-line entry point: ``twoweight SUBCOMMAND --config PATH [overrides]``.

Each subcommand writes ``<out>/<subcommand>.csv`` and a run manifest
``<out>/<subcommand>.manifest.json`` holding the resolved config, the seed and
library versions.  Exit status: 0 on success, 1 on configuration or usage
errors, 2 when a measure turned out degenerate.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from ..exceptions import ConfigError, DegenerateMeasureError
from . import experiments as ex
from .config import ExperimentConfig, load_config

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE = 0, 1, 2


def _constants(cfg):
    return ex.run_constants_table(cfg), ex.CONSTANT_COLUMNS


def _rwt(cfg):
    return ex.run_rwt_table(cfg), ex.RWT_COLUMNS


def _goodlambda(cfg):
    return ex.run_goodlambda_table(cfg), ex.GOODLAMBDA_COLUMNS


def _tptest(cfg):
    return ex.run_tptest_table(cfg), ex.TPTEST_COLUMNS


def _cancel(cfg):
    return ex.run_cancel_table(cfg), ex.CONSTANT_COLUMNS


def _sweep(cfg):
    return ex.run_sweep(cfg), ex.sweep_columns(cfg)


def _refine(cfg):
    return ex.refinement_study(cfg), ("pair_id", "constant", "L", "value", "rel_change",
                                      "status")


COMMANDS = {
    "constants": (_constants, "A2, one-tailed A2 and doubling constants per weight pair"),
    "rwt": (_rwt, "restricted weak type norm with witnesses"),
    "goodlambda": (_goodlambda, "good-lambda distribution tables"),
    "tptest": (_tptest, "strong norm against the one-tailed plus testing bound"),
    "cancel": (_cancel, "polynomial cancellation constants"),
    "sweep": (_sweep, "every theorem-check column for every weight pair"),
    "refine": (_refine, "constants against grid resolution"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twoweight", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="PATH", help="experiment config file")
        src.add_argument("--manifest", metavar="PATH", help="replay a run manifest")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--threads", type=int, metavar="N")
        p.add_argument("--level", type=int, metavar="L", help="grid resolution override")
    return parser


def _resolve(args) -> ExperimentConfig:
    if args.manifest:
        if not os.path.isfile(args.manifest):
            raise ConfigError(f"manifest file not found: {args.manifest}")
        with open(args.manifest, encoding="utf-8") as fh:
            try:
                cfg = ExperimentConfig.from_dict(json.load(fh)["config"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"bad manifest {args.manifest}: {exc}") from None
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {k: getattr(args, k) for k in ("out", "seed", "threads", "level")
                 if getattr(args, k) is not None}
    return dataclasses.replace(cfg, **overrides).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        rows, columns = COMMANDS[args.command][0](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateMeasureError as exc:
        print(f"degenerate measure: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    os.makedirs(cfg.out, exist_ok=True)
    csv_path = os.path.join(cfg.out, f"{args.command}.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(ex.to_csv(rows, columns))
    with open(os.path.join(cfg.out, f"{args.command}.manifest.json"), "w",
              encoding="utf-8") as fh:
        fh.write(ex.manifest(cfg, args.command))
    print(csv_path)
    if any(str(r.get("status", "")).startswith("degenerate") for r in rows):
        print("degenerate measure in at least one weight pair", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
