"""Run every bundled experiment config through the CLI and write the CSVs.

    python3 scripts/run_experiments.py [--out out] [--only df step ...]

Exits non-zero if any experiment's checks fail.
"""

import argparse
import sys
from pathlib import Path

from fhigs.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

EXPERIMENTS = {
    "df": ("df", "lead_df.ini"),
    "simulate_lead": ("simulate", "lead_simulate.ini"),
    "simulate_lowpass": ("simulate", "lowpass_simulate.ini"),
    "gainloss": ("gainloss", "gainloss.ini"),
    "step": ("step", "step.ini"),
    "verify": ("verify", "verify.ini"),
}


def run(names: list[str], out: Path) -> int:
    worst = 0
    for name in names:
        command, config = EXPERIMENTS[name]
        print(f"== {name}")
        code = main([command, "--config", str(CONFIGS / config), "--out", str(out / name)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--only", nargs="+", choices=sorted(EXPERIMENTS), default=list(EXPERIMENTS))
    args = parser.parse_args()
    sys.exit(run(args.only, args.out))
