"""Primal vs dual evidence on small linear-Gaussian problems, by quadrature and Monte Carlo.

    python scripts/duality_check.py --gammas 1 0.5 0.1 0.05
"""

import argparse

import numpy as np

from iic import (RegressionDataset, dual_prior_linear, evidence_dual, evidence_primal,
                 gaussian_convolution_evidence, isotropic_gaussian, linear_model)
from iic.verify import linear_gaussian_instance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--gammas", type=float, nargs="+", default=[1.0, 0.5, 0.1, 0.05])
    ap.add_argument("--instances", type=int, default=4)
    ap.add_argument("--mc-samples", type=int, default=200_000)
    args = ap.parse_args()

    print(f"{'inst':>4} {'d':>2} {'gamma':>6} {'closed form':>13} {'primal quad':>9} {'dual quad':>9} "
          f"{'primal MC':>9} {'dual MC':>9}")
    for i in range(args.instances):
        d = 2 + i % 2
        X, y = linear_gaussian_instance(i, 1, d, unit_rows=True)
        prior = isotropic_gaussian(d, 1.0)
        data = RegressionDataset(X, y)
        dual = dual_prior_linear(X, 1.0)
        for g in args.gammas:
            zc = gaussian_convolution_evidence(X, y, 1.0, g)
            rel = lambda z: abs(z - zc) / zc
            zp = evidence_primal(linear_model(d), data, prior, g, budget=200)
            zd = evidence_dual(dual, y, g, budget=400)
            mp = evidence_primal(linear_model(d), data, prior, g, "monte-carlo", budget=args.mc_samples, seed=i)
            md = evidence_dual(dual, y, g, "monte-carlo", budget=args.mc_samples, seed=i)
            print(f"{i:>4} {d:>2} {g:>6g} {zc:>13.6e} {rel(zp):>9.1e} {rel(zd):>9.1e} "
                  f"{rel(mp):>9.1e} {rel(md):>9.1e}")
    print("columns after the closed form are relative errors")


if __name__ == "__main__":
    main()
