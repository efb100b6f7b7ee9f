"""Command-line front-end.

Exit statuses: 0 success, 2 configuration error (the message names the
offending key), 3 runtime failure (e.g. a lost track). Errors print to
stderr; the tool never raises out of main().
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunSettings, load_config
from .harness import RuntimeFailure, run_subcommand

SUBCOMMANDS = ("crb-sweep", "track", "estimate-once", "mc-rmse")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nearbeam",
        description=(
            "Near-field sensing-assisted predictive beamforming simulator"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("crb-sweep", "root CRB of each mobility parameter across range"),
        ("track", "run the per-CPI sense-predict-focus tracking loop"),
        ("estimate-once", "single-frame maximum-likelihood estimate"),
        ("mc-rmse", "Monte Carlo RMSE against the bound at a fixed state"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the scenario config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument(
            "--seed",
            type=int,
            default=None,
            help="unsigned 64-bit master seed (overrides run.seed)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching the config-error status
        return int(exc.code or 0)

    try:
        config = load_config(args.config)
        if args.seed is not None:
            if not (0 <= args.seed < 2**64):
                raise ConfigError("run.seed: must fit in an unsigned 64-bit integer")
            config = replace(
                config, run=RunSettings(num_cpis=config.run.num_cpis, seed=args.seed)
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        return run_subcommand(args.command, config, Path(args.out))
    except ConfigError as exc:
        # a subcommand may require sections this config omitted
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RuntimeFailure as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # contract: never panic on malformed input
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
