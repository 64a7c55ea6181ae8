"""``evolvability`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from evolvability.experiment import COMMANDS, PROFILES, ConfigError, ExperimentConfig

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evolvability",
        description="Walk-based evolvability analysis on behavior landscapes.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=(func.__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", help="JSON config file; omitted keys fall back to the profile")
        p.add_argument("--seed", type=int, help="global seed (overrides config)")
        p.add_argument("--jobs", type=int, help="worker processes (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {"seed": args.seed, "jobs": args.jobs, "out": args.out}
    try:
        if args.config:
            cfg = ExperimentConfig.load(args.config, args.profile, **overrides)
        else:
            cfg = ExperimentConfig.from_dict(None, args.profile, **overrides)
        payload = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"evolvability: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"evolvability: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
