"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 failed
oracle check.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

from .harness import (
    PRESET_NAMES,
    ConfigError,
    emit_csv,
    parse_config_with_provenance,
    preset,
    resolved_config_lines,
    run_sweep,
)
from .schemes import oracle_mismatch_count

USAGE_ERROR, CONFIG_ERROR, CHECK_FAILED = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; this tool reserves 2 for
    # configuration problems, so remap usage errors to 1.
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="relevance-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep and write results.csv")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES, help="built-in figure preset")
    src.add_argument("--config", metavar="FILE", help="configuration file")
    run.add_argument("--out", metavar="DIR", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="master seed override")
    run.add_argument("--replications", type=int, default=None, help="replication override")
    run.add_argument("--slots", type=int, default=None, help="slots-per-episode override")
    run.add_argument("--quiet", action="store_true", help="suppress progress output")

    val = sub.add_parser("validate", help="parse a configuration and echo the resolved spec")
    val.add_argument("--config", metavar="FILE", required=True)

    orc = sub.add_parser("oracle", help="cross-check ideal selection against brute force")
    orc.add_argument("--instances", type=int, default=1000)
    orc.add_argument("--seed", type=int, default=2024)
    return parser


def _load_spec(args: argparse.Namespace) -> tuple:
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        return parse_config_with_provenance(text)
    return preset(args.preset), {}


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        spec, overridden = _load_spec(args)
        cli_overridden = set()
        for attr, key, value in (
            ("master_seed", "run.seed", args.seed),
            ("replications", "run.replications", args.replications),
            ("slots_per_episode", "run.slots", args.slots),
        ):
            if value is not None:
                spec = replace(spec, **{attr: value})
                cli_overridden.add(key)
        spec = replace(spec, output_path=args.out)
        spec.validate()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return CONFIG_ERROR

    os.makedirs(args.out, exist_ok=True)
    progress = None if args.quiet else lambda msg: print(msg, file=sys.stderr)
    started = time.time()
    rows = run_sweep(spec, progress=progress)
    csv_path = os.path.join(args.out, "results.csv")
    emit_csv(rows, csv_path)
    log_path = os.path.join(args.out, "run.log")
    with open(log_path, "w", encoding="utf-8") as f:
        f.write(f"source = {args.preset or args.config}\n")
        f.write("\n".join(resolved_config_lines(spec, overridden, cli_overridden)) + "\n")
        f.write(f"rows = {len(rows)}\nelapsed_seconds = {time.time() - started:.1f}\n")
    if not args.quiet:
        print(f"wrote {csv_path} ({len(rows)} rows); parameters in {log_path}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        with open(args.config, encoding="utf-8") as f:
            spec, overridden = parse_config_with_provenance(f.read())
    except OSError as e:
        print(f"config error: cannot read config file: {e}", file=sys.stderr)
        return CONFIG_ERROR
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return CONFIG_ERROR
    print("\n".join(resolved_config_lines(spec, overridden)))
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    mismatches = oracle_mismatch_count(args.instances, args.seed)
    print(f"oracle: {args.instances} instances, {mismatches} mismatches")
    return CHECK_FAILED if mismatches else 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_oracle(args)


if __name__ == "__main__":
    raise SystemExit(main())
