"""Command-line driver.

    doubly-scenery simulate --preset paper-desk --out runs/desk
    doubly-scenery verify-cf --config my.json --threads 4

Exit status: 0 when the experiment passes, 2 when a verdict fails, 1 on
usage or runtime errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments
from .config import PRESETS, load_config, preset
from .diagnostics import _jsonable

log = logging.getLogger("doubly_scenery")

COMMANDS = {
    "simulate": experiments.run_simulate,
    "verify-cf": experiments.run_verify_cf,
    "verify-scaling": experiments.run_verify_scaling,
    "check-conditions": experiments.run_check_conditions,
    "oracle-test": experiments.run_oracle_test,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doubly-scenery",
        description="Simulate random walks in doubly random scenery and check their limit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="PATH", help="JSON (or .toml) config file")
        src.add_argument("--preset", choices=sorted(PRESETS),
                         help="named preset (default: paper-desk)")
        p.add_argument("--seed", type=int, metavar="U64", help="override root_seed")
        p.add_argument("--out", metavar="DIR", help="override the output directory")
        p.add_argument("--threads", type=int, default=1, metavar="N",
                       help="worker threads; results do not depend on it")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for verdicts
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else preset(args.preset or "paper-desk")
        changes = {}
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ValueError("--seed must be an unsigned 64-bit integer")
            changes["root_seed"] = args.seed
        if args.out is not None:
            changes["out_dir"] = args.out
        if changes:
            cfg = cfg.replace(**changes)
        if args.threads < 1:
            raise ValueError("--threads must be >= 1")
        log.info("running %s into %s", args.command, cfg.out_dir)
        report, passed = COMMANDS[args.command](cfg, threads=args.threads)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = {k: report[k] for k in ("passed", "ratio_dispersion", "agree_fraction",
                                      "hurst", "path", "rows") if k in report}
    print(json.dumps(_jsonable({"command": args.command, **summary})))
    return 0 if bool(passed) else 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
