#!/usr/bin/env python3
"""Run the full desk-scale study into out/: sweeps, spectra, bound suite.

Equivalent to invoking the CLI on every config in scripts/configs; kept as
one script so a fresh checkout reproduces all data products with one command:

    python scripts/run_full_study.py [--threads K] [--output-root out]
"""

import argparse
import json
import pathlib
import sys

from vortexmoduli.cli import main as cli

COMMANDS = [
    ("sweep", "sweep_round_n1.json"),
    ("sweep", "sweep_bump_n2.json"),
    ("spectrum", "spectrum_round.json"),
    ("check-laxmilgram", "laxmilgram_bump.json"),
    ("solve-vortex", "solve_vortex_example.json"),
]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--output-root", default="out")
    args = ap.parse_args()
    cfg_dir = pathlib.Path(__file__).parent / "configs"
    root = pathlib.Path(args.output_root)
    worst = 0
    for command, name in COMMANDS:
        cfg_path = cfg_dir / name
        out_dir = root / name.replace(".json", "")
        print(f"== {command} {name} -> {out_dir}")
        code = cli(
            [
                command,
                "--config",
                str(cfg_path),
                "--output-dir",
                str(out_dir),
                "--threads",
                str(args.threads),
            ]
        )
        print(f"   exit {code}")
        worst = max(worst, code)
        summary = out_dir / "sweep_summary.json"
        if summary.exists():
            fits = json.loads(summary.read_text())["fits"]["pooled"]
            for key, fit in fits.items():
                if fit:
                    print(f"   {key}: slope {fit['slope']:.3f} (r^2 {fit['r_squared']:.5f})")
    return worst


if __name__ == "__main__":
    sys.exit(main())
