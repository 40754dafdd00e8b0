#!/usr/bin/env python3
"""Energy ratio LHS / (t eps^3) of the monolithic solver for several thicknesses."""
import argparse
import time
from fractions import Fraction

import numpy as np

from thinfsi import fsi_oracle
from thinfsi.harness import RunConfig
from thinfsi.params import build_regime


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--h", type=Fraction, nargs="+", default=[Fraction(1, 4), Fraction(1, 8)])
    args = ap.parse_args()

    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for h in args.h:
        t0 = time.perf_counter()
        regime = build_regime(cfg.gamma, cfg.kappa, float(h))
        mesh = fsi_oracle.FsiMesh.from_regime(regime, cfg.n, cfg.m_f, cfg.m_s)
        run = fsi_oracle.run(regime, cfg.materials, cfg.force(), mesh, cfg.t_final, cfg.dt)
        ratio = np.array([r.lhs_over_t_eps3 for r in run.ledger])
        print(f"h = {str(h):<6} terminal ratio = {ratio[-1]:.5e}  max ratio = {ratio.max():.5e}  "
              f"balance = {run.max_balance_error:.2e}  ({time.perf_counter() - t0:.2f} s)")


if __name__ == "__main__":
    main()
