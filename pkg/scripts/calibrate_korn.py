#!/usr/bin/env python3
"""Recompute the empirical Korn constant from the frozen random ensemble.

The constant stored in ``thinfsi.analysis.KORN_C_TEST`` is twice the largest
ratio ``eps ||grad' v3|| / ||sym grad v||`` observed over the ensemble.
"""
import argparse

import numpy as np

from thinfsi.analysis import KORN_C_TEST, KORN_SEED, korn_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=KORN_SEED)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.25, 0.125, 0.0625])
    ap.add_argument("--margin", type=float, default=2.0, help="safety factor applied to the maximum")
    args = ap.parse_args()

    for eps in args.eps:
        r = korn_ensemble(eps, seed=args.seed, count=args.count)
        print(f"eps = {eps:<8g} max = {r.max():.6f}  median = {np.median(r):.6f}")
    ref = korn_ensemble(args.eps[0], seed=args.seed, count=args.count).max()
    print(f"suggested constant = {args.margin * ref:.4f} (stored: {KORN_C_TEST})")


if __name__ == "__main__":
    main()
