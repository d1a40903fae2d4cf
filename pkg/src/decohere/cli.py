"""``decohere`` command line.

Exit status: 0 all checks pass, 1 a check failed, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SCENARIOS, ConfigError, load_config
from .scenarios import OUTPUT_DIR_ENV, ScenarioError, run_scenario

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _print_config_error(exc: ConfigError) -> None:
    print(f"config {exc.kind} error:", file=sys.stderr)
    for e in exc.errors:
        print(f"  {e}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _print_config_error(exc)
        return EXIT_CONFIG
    try:
        report = run_scenario(cfg, args.output_dir)
    except ScenarioError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _print_config_error(exc)
        return EXIT_CONFIG
    print(f"ok: scenario {cfg.scenario}, config hash {cfg.config_hash}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    width = max(map(len, SCENARIOS))
    for name, desc in SCENARIOS.items():
        print(f"{name:<{width}}  {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decohere",
                                     description="Short-time decoherence of oscillator-bath models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a scenario from a JSON config")
    p.add_argument("config")
    p.add_argument("-o", "--output-dir", default=None,
                   help=f"output directory (overrides ${OUTPUT_DIR_ENV} and the config)")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("scenarios", help="list available scenarios")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
