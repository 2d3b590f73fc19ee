"""Command line entry point: ``calmedns <experiment> --config run.toml``.

Exit status: 0 when every monitor passes, 1 when a monitor fails, 2 for an
invalid configuration, 3 for a runtime error (blow-up, bad checkpoint, ...).
Configuration errors are also written as ``config_error.json`` in the output
directory when one can be determined.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import EXPERIMENTS, load_config, parse_config
from .exceptions import CalmedNSError, ConfigError
from .io import dumps_json

EXIT_OK, EXIT_MONITOR, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="calmedns", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"calmedns {__version__}")
    sub = p.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", type=Path, help="TOML run configuration (defaults if omitted)")
        s.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        s.add_argument("--seed", type=int, help="single noise seed (overrides noise.seed and experiment.seeds)")
    return p


def _load(args):
    cfg = load_config(args.config) if args.config else parse_config("")
    overrides = {"experiment.kind": args.experiment}
    if args.out is not None:
        overrides["output.dir"] = str(args.out)
    if args.seed is not None:
        overrides["noise.seed"] = args.seed
        overrides["experiment.seeds"] = [args.seed]
    return cfg.replace(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "config_error.json").write_text(dumps_json({"errors": list(e.errors)}))
        return EXIT_CONFIG
    from .experiments import run_experiment

    try:
        res = run_experiment(cfg)
    except CalmedNSError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    for name, ok in sorted(res.monitors.items()):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"config_hash={cfg.hash}  output={cfg.output_dir}")
    return res.exit_status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
