"""Command-line front-end for figure rendering.

Exit statuses: 0 success, 2 bad input (schema violations name the offending
column), 3 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .plots import PLOT_KINDS, PlotSpec, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nearbeam-render",
        description="Render nearbeam CSV results into figures",
    )
    parser.add_argument("--kind", required=True, choices=PLOT_KINDS)
    parser.add_argument(
        "--in",
        dest="inputs",
        action="append",
        required=True,
        metavar="PATH",
        help="input CSV; repeat once to overlay a second run",
    )
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument(
        "--linear", action="store_true", help="linear axes instead of log-log"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        spec = PlotSpec(
            kind=args.kind,
            inputs=tuple(Path(p) for p in args.inputs),
            out=Path(args.out),
            log_scale=not args.linear,
        )
        render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # never raise out of main()
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
