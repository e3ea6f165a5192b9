#!/usr/bin/env python
"""Run every experiment against its default config and collect CSVs.

Usage: python scripts/run_all_experiments.py [OUT_DIR]
"""

import sys
from pathlib import Path

from boxcgf.cli import main

ROOT = Path(__file__).resolve().parent.parent
RUNS = [
    ("lrp", "lrp_gaussian_d1.json"),
    ("mdp", "mdp_gaussian_d1.json"),
    ("clt", "clt_nonlinear_d1.json"),
    ("additivity", "additivity_gaussian_d1.json"),
    ("audit", "audit_gaussian_d1.json"),
    ("calibrate", "calibrate_gaussian_d1.json"),
]


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out"
    worst = 0
    for command, config in RUNS:
        print(f"== {command} ({config})", file=sys.stderr)
        code = main([command, "--config", str(ROOT / "configs" / config),
                     "--out", out])
        worst = max(worst, code)
    sys.exit(worst)
