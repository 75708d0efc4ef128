"""Command-line entry point.

    vefiber {simulate|sweep|theory-table|optimize|validate}
        [--config FILE] [--out DIR] [--jobs J] [--preset NAME]

The subcommand fixes the run mode; --preset loads a shipped configuration
and --config overlays a JSON file on top of it.  --out overrides the
config's output directory.
"""

from __future__ import annotations

import argparse
import json
import sys

from .runner import MODES, PRESETS, ConfigError, parse_config, run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vefiber",
        description="Swimming-filament simulations, sweeps, and theory tables.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run in {mode} mode")
        p.add_argument("--config", metavar="FILE",
                       help="JSON run configuration")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (overrides config)")
        p.add_argument("--jobs", metavar="J", type=int, default=None,
                       help="worker processes for sweeps "
                            "(default: logical cores)")
        p.add_argument("--preset", metavar="NAME", choices=sorted(PRESETS),
                       help=f"start from a shipped preset: "
                            f"{', '.join(sorted(PRESETS))}")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    data = None
    if args.config is not None:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 2
        except json.JSONDecodeError as exc:
            print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
            return 2
    if data is None and args.preset is None:
        print("error: provide --config and/or --preset", file=sys.stderr)
        return 2
    try:
        config = parse_config(data, preset=args.preset, mode=args.mode,
                              out=args.out)
        return run(config, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
