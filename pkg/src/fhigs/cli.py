"""Command-line entry point: ``fhigs {df,simulate,gainloss,step,verify}``.

Exit status is 0 on success, 1 when a check fails and 2 on a configuration
or usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .simulator import IntegrationError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2


def _report(checks: dict[str, bool]) -> bool:
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return all(checks.values())


def _written(paths: list[Path]) -> None:
    for p in paths:
        print(f"wrote {p}")


def _df(cfg: ExperimentConfig, args) -> int:
    _written(ex.cmd_df(cfg, args.out, validate=args.profile == "debug"))
    return EXIT_OK


def _simulate(cfg: ExperimentConfig, args) -> int:
    _written(ex.cmd_simulate(cfg, args.out))
    return EXIT_OK


def _gainloss(cfg: ExperimentConfig, args) -> int:
    paths, report = ex.cmd_gainloss(cfg, args.out)
    _written(paths)
    for r in report.rows:
        print(f"{r.name}: rms_ratio={r.rms_ratio:.6g} correlation={r.correlation:.6g}")
    return EXIT_OK if _report(report.checks()) else EXIT_CHECK_FAILED


def _step(cfg: ExperimentConfig, args) -> int:
    paths, report = ex.cmd_step(cfg, args.out)
    _written(paths)
    for r in report.rows:
        print(f"{r.name}: overshoot={r.overshoot_pct:.6g}% settling={r.settling_time:.6g}s "
              f"error={r.steady_state_error:.3g} status={r.status}")
    return EXIT_OK if _report(report.checks()) else EXIT_CHECK_FAILED


def _verify(cfg: ExperimentConfig, args) -> int:
    paths, results = ex.cmd_verify(cfg, args.out, args.seed)
    for r in results:
        print(r.line())
    _written(paths)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


COMMANDS = {
    "df": (_df, "describing-function sweeps of the element and the plain HIGS"),
    "simulate": (_simulate, "open-loop time-domain run with its event log"),
    "gainloss": (_gainloss, "pure versus mixed sinusoid gain-loss comparison"),
    "step": (_step, "closed-loop step responses"),
    "verify": (_verify, "oracle and invariant checks"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fhigs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=name != "verify",
                       help="experiment config (INI); verify falls back to built-in defaults")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for randomised verification draws")
        p.add_argument("--profile", choices=("debug", "release-checks"), default="release-checks",
                       help="debug: verbose logging, closed forms cross-checked everywhere")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.profile == "debug" else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else parse_config("", "<defaults>")
        return COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
