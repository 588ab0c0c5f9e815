"""Command-line entry point.

One subcommand per pipeline stage; every invocation reads a JSON run
config, writes its artifacts under the configured output directory, and
drops a manifest of content hashes next to them.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
divergence, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .exceptions import ConfigError, DataError, DivergenceError
from .pipeline import COMMANDS, apply_seed, parse_run_config, run_stage, write_manifest

_HELP = {
    "synth": "generate the synthetic sensor CSV described by data.synth",
    "ingest": "clean, fill and resample raw series into aligned frames",
    "preprocess": "export sliding-window pattern sets and normalization stats",
    "train": "train one perceptron forecaster and write its model file",
    "sweep": "train one member per past size and score them on validation",
    "ensemble": "combine sweep members under the configured strategy",
    "baseline": "fit the smoothing family and AR baselines, score them rolling",
    "evaluate": "score saved model files on the configured split",
    "mi": "histogram mutual-information table across channels",
    "gridsearch": "exhaustive hyperparameter grid with resumable results CSV",
    "report": "side-by-side comparison table for saved model files",
}

_TAKES_MODELS = ("evaluate", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermocast",
        description="Indoor-temperature forecasting pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"thermocast {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=_HELP[command])
        sub.add_argument("--config", required=True, help="run config JSON")
        sub.add_argument("--out", help="output directory (overrides the config)")
        sub.add_argument("--jobs", type=int, default=1, help="worker processes")
        sub.add_argument("--seed", type=int, help="override every seed in the config")
        if command in _TAKES_MODELS:
            sub.add_argument("models", nargs="+", help="saved model JSON files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    models = getattr(args, "models", ())
    try:
        run = parse_run_config(args.config)
        if args.out is not None:
            run = replace(run, out=Path(args.out))
        if args.seed is not None:
            run = apply_seed(run, args.seed)
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        artifacts = run_stage(args.command, run, jobs=args.jobs, models=models)
        manifest = write_manifest(run, args.command, args.config, artifacts, models=models)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 5
    for name in sorted(artifacts):
        print(f"wrote {artifacts[name]}")
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
