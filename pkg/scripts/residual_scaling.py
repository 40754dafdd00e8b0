#!/usr/bin/env python3
"""Steady fluid residual of the reconstructed approximation as eps decreases."""
import argparse
import sys

from thinfsi.harness import residual_scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmin", type=int, default=3, help="largest eps is 2^-kmin")
    ap.add_argument("--kmax", type=int, default=7, help="smallest eps is 2^-kmax")
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--eta", type=float, default=1.0)
    args = ap.parse_args()

    eps = tuple(2.0 ** -k for k in range(args.kmin, args.kmax + 1))
    res = residual_scaling(eps, n=args.n, eta=args.eta)
    print(f"{'eps':>10} {'r_f':>12} {'r_b':>12} {'div_max':>12}")
    for row in zip(res.eps, res.r_f, res.r_b, res.div_max):
        print(" ".join(f"{x:12.4e}" for x in row))
    if res.fit is None:
        print("not enough positive residuals for a fit")
        return 1
    print(f"slope = {res.fit.slope:.4f} (rms deviation {res.fit.residual:.2e})")
    return 0 if abs(res.fit.slope - 1.5) <= 0.1 else 1


if __name__ == "__main__":
    sys.exit(main())
