#!/usr/bin/env python3
"""Oracle against reduced approximation over a list of thicknesses.

Writes per-level energy ledgers, ``errors.csv``, ``rates.csv`` and log-log
plots to the output directory and prints the fitted slopes.
"""
import argparse
import sys
from pathlib import Path

from thinfsi.harness import RunConfig, convergence_study
from thinfsi.harness.study import GATED


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None, help="configuration file (default: built-in defaults)")
    ap.add_argument("--out", default="out/convergence")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    cfg = cfg.with_overrides(workers=args.workers)
    report = convergence_study(cfg, Path(args.out))
    for lv in report.levels:
        print(f"h = {lv.h:<8g} velocity = {lv.errors.velocity:.4e}  disp_vert = {lv.errors.disp_vert:.4e}  "
              f"({lv.seconds:.2f} s)")
    for e in report.entries:
        tag = "gated" if e.norm in GATED else "info"
        print(f"{e.norm:<12} raw {e.slope_raw:7.4f}  normalized {e.slope_normalized:7.4f}  "
              f"predicted {e.predicted}  pass {e.passed} ({tag})")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
