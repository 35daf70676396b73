"""Command-line entry point: ``ckmplace <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import experiment
from .config import parse_config, parse_range
from .errors import BudgetExceededError, CkmError, ConfigError, DegenerateSetError, InfeasiblePlacementError

log = logging.getLogger("ckmplace")

# exit codes by failure class; argparse itself exits with 2 on bad usage
EXIT_CODES = (
    (ConfigError, 3),
    (CkmError, 4),
    (InfeasiblePlacementError, 5),
    (BudgetExceededError, 6),
    (DegenerateSetError, 7),
    (OSError, 8),
)


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _gbs_index(text: str):
    if text == "all":
        return text
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a 1-based index or 'all', got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("GBS indices start at 1")
    return k


def _power_range(text: str):
    try:
        return parse_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ckmplace", description="UAV placement on channel knowledge maps.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-ckm", help="synthesise maps from a building scene file")
    p.add_argument("--scene", required=True, help="scene TOML with [[building]] and [[gbs]] tables")
    p.add_argument("--gbs", type=_gbs_index, default="all", help="1-based GBS index or 'all'")
    p.add_argument("--spacing", type=_positive, default=5.0, help="grid spacing in metres")
    p.add_argument("--altitude", type=_positive, default=None, help="UAV altitude in metres (overrides the file)")
    p.add_argument("--out", required=True, help="output directory")

    def with_config(name, help_text):
        q = sub.add_parser(name, help=help_text)
        q.add_argument("--config", required=True, help="experiment TOML file")
        q.add_argument("--out", default=None, help="output directory (overrides run.output_dir)")
        return q

    with_config("optimize", "derivative-free placement optimisation")
    p = with_config("exhaustive", "lattice exhaustive search")
    p.add_argument("--step", type=_positive, default=None, help="lattice step in metres")
    p = with_config("baseline", "hovering or LoS-designed placement")
    p.add_argument("--scheme", choices=("hover", "los"), required=True)
    p = with_config("sweep", "sum rate versus UAV transmit power")
    p.add_argument("--power-dbm", type=_power_range, default=None, help="inclusive range start:step:stop in dBm")
    return parser


def _overrides(args) -> dict:
    changes = {"mode": "sweep" if args.command == "sweep" else args.command}
    if args.command == "exhaustive" and args.step is not None:
        changes["grid_step"] = args.step
    if args.command == "baseline":
        changes["scheme"] = args.scheme
    if args.command == "sweep" and args.power_dbm is not None:
        changes["sweep_dbm"] = args.power_dbm
    return changes


def run(args) -> int:
    if args.command == "generate-ckm":
        paths = experiment.generate_ckms(args.scene, args.gbs, args.spacing, args.out, args.altitude)
        for path in paths:
            print(path)
        return 0
    config = dataclasses.replace(parse_config(args.config), **_overrides(args))
    written = experiment.run_experiment(config, args.out)
    for path in written.values():
        print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except Exception as exc:
        for kind, code in EXIT_CODES:
            if isinstance(exc, kind):
                break
        else:
            code = 1
        log.debug("failure", exc_info=True)
        print(f"ckmplace {args.command}: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
