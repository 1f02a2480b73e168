"""Command line interface: axioms | run | certify | meta.

Exit codes: 0 all checks pass, 1 a mathematical check failed (the written
report carries the witness), 2 config or usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .harness import cmd_axioms, cmd_certify, cmd_meta, cmd_run
from .operators import ConfigError
from .rates import ConsistencyError
from .schedules import ScheduleError
from .spaces import DomainError, ShapeError

_COMMANDS = {
    "axioms": (cmd_axioms, "check the combination axioms of the configured space"),
    "run": (cmd_run, "run both iterations and export trajectories + linkage"),
    "certify": (cmd_certify, "build and verify every applicable rate certificate"),
    "meta": (cmd_meta, "metastability window search and rate transfer audit"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratecert",
        description="Anchored fixed-point iterations with verifiable rate certificates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = _COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return command(cfg, out_dir, quiet=args.quiet)
    except (ConfigError, ScheduleError, ConsistencyError, DomainError, ShapeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
