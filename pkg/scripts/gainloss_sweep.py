"""Mixed-sinusoid RMS ratio of the plain HIGS against its integrator frequency.

    python3 scripts/gainloss_sweep.py [omega_h ...]

Rewrites ``omega_h`` of the HIGS element in ``configs/gainloss.ini`` and
prints the ratio for each value.
"""

import sys
from pathlib import Path

from fhigs.config import parse_config
from fhigs.experiments import run_gainloss

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "gainloss.ini"


def ratio_at(text: str, omega_h: float) -> float:
    cfg = parse_config(text, str(CONFIG))
    cfg.sections["element higs"]["omega_h"] = repr(omega_h)
    return run_gainloss(cfg).row("higs_mixed").rms_ratio


if __name__ == "__main__":
    values = [float(v) for v in sys.argv[1:]] or [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]
    text = CONFIG.read_text()
    for w in values:
        print(f"omega_h={w:g} rms_ratio={ratio_at(text, w):.4f}")
