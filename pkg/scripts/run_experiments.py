#!/usr/bin/env python3
"""Run every CLI experiment with the configs in scripts/configs.

    python3 scripts/run_experiments.py [--out results] [--threads 4]

Each run writes into its own subdirectory; the exit code of every run is
printed and the script fails if any of them is nonzero.
"""

import argparse
import sys
import time
from pathlib import Path

from gibbslab.cli import main

HERE = Path(__file__).resolve().parent
RUNS = [
    ("oracle-suite", None),
    ("borel-toy", "toy.cfg"),
    ("coeffs", "coeffs_d1.cfg"),
    ("converge", "converge_d1.cfg"),
    ("growth", "growth_d1.cfg"),
    ("growth", "growth_d2.cfg"),
    ("growth", "growth_d3.cfg"),
    ("counterterm", "counterterm_d1.cfg"),
    ("pairings-dump", "pairings_m2.cfg"),
]


def run(out: Path, threads: int) -> int:
    failures = 0
    for command, cfg in RUNS:
        name = cfg[:-4] if cfg else command
        argv = [command, "--out", str(out / name), "--threads", str(threads)]
        if cfg:
            argv += ["--config", str(HERE / "configs" / cfg)]
        t0 = time.perf_counter()
        code = main(argv)
        print(f"{command:14s} {name:16s} exit={code} {time.perf_counter() - t0:6.1f}s")
        failures += code != 0
    return failures


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    sys.exit(1 if run(args.out, args.threads) else 0)
