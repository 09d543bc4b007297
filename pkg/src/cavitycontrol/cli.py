"""Command line entry point: ``cavitycontrol <stage> --config scenario.yaml``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import load_config
from .errors import CavityControlError, UsageError
from .pipeline import STAGES, emit_plot_data, load_manifest, run_scenario

logger = logging.getLogger("cavitycontrol")


def _common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
    p.add_argument("--config", type=Path, required=needs_config, help="scenario YAML file")
    p.add_argument("--out", type=Path, default=None,
                   help="output directory (default: output_dir from the config)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--stage-input", type=Path, default=None,
                   help="directory holding upstream stage artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavitycontrol",
        description="Resonator-shaped laser control: synthesis, spectroscopy, optimization, "
                    "kinetics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        _common(sub.add_parser(stage, help=f"run the {stage} stage"))
    _common(sub.add_parser("validate", help="check a config and report every problem"))
    plot = sub.add_parser("plot-data", help="print long-format plot table from a finished run")
    plot.add_argument("run_dir", type=Path, help="directory holding manifest.json")
    plot.add_argument("which", choices=["intensity", "spectrum", "objective", "kinetics"])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot-data":
            rows = emit_plot_data(load_manifest(args.run_dir), args.which)
            writer = csv.writer(sys.stdout)
            writer.writerow(["series", "x", "y"])
            writer.writerows((s, repr(x), repr(y)) for s, x, y in rows)
            return 0
        config = load_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        if args.command == "validate":
            print(f"ok: {args.config} (sha256 {config.hash[:12]})")
            return 0
        if args.stage_input is not None and not args.stage_input.is_dir():
            raise UsageError(f"--stage-input {args.stage_input} is not a directory")
        manifest = run_scenario(config, args.command, args.out, args.stage_input)
        print(f"{args.command}: wrote {', '.join(sorted(manifest.outputs.values()))} "
              f"to {manifest.output_dir}")
        return 0
    except CavityControlError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
