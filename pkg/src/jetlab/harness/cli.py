"""Command line: ``jetlab <mode> --config cfg.json [--out DIR] [--grid-scale F] [--exact]``."""
from __future__ import annotations

import argparse
import json
import sys

from .. import __version__
from .config import MODES, SCHEMA, ConfigError, load_config
from .report import RunManifest
from .runner import EXIT_ERROR, output_dir, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="jetlab",
        description="Run a jet-approximation experiment from a JSON config.")
    p.add_argument("mode", nargs="?", choices=MODES,
                   help="experiment mode (must match the config's mode if it sets one)")
    p.add_argument("--config", help="path to the JSON config")
    p.add_argument("--out", help="output directory (overrides $JETLAB_OUT_DIR and the config)")
    p.add_argument("--grid-scale", type=float, default=None,
                   help="multiply every sample count of the grid rule")
    p.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    p.add_argument("--version", action="version", version=f"jetlab {__version__}")
    p.add_argument("--schema", action="store_true", help="print the config JSON schema")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.schema:
        print(json.dumps(SCHEMA, indent=2, sort_keys=True))
        return 0
    if not args.mode or not args.config:
        build_parser().error("mode and --config are required")
    if args.grid_scale is not None and not args.grid_scale > 0:
        build_parser().error("--grid-scale must be positive")
    overrides = {"exact": True} if args.exact else {}
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        if raw.get("mode", args.mode) != args.mode:
            raise ConfigError(f"$.mode: config says {raw['mode']!r}, command line says "
                              f"{args.mode!r}")
        overrides["mode"] = args.mode
        cfg = load_config(args.config, overrides)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"jetlab: {exc}", file=sys.stderr)
        if args.out:
            man = RunManifest(args.mode, "", started=RunManifest.now(),
                              finished=RunManifest.now(), status="error", exit_code=EXIT_ERROR,
                              error={"type": type(exc).__name__, "message": str(exc)})
            man.write(args.out)
        return EXIT_ERROR
    man, code = run_experiment(cfg, args.out, args.grid_scale)
    out = output_dir(cfg, args.out)
    if man.error:
        print(f"jetlab: {man.status}: {man.error['type']}: {man.error['message']}",
              file=sys.stderr)
    print(f"{cfg.mode}: {man.status} -> {out}/manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
