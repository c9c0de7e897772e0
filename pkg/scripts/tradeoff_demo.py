"""Trace P(D) on a small random model for several divergences.

Prints D_min, D_max and, for each divergence, a few points of the lower
convex envelope together with the constrained solution at the midpoint.

    python3 scripts/tradeoff_demo.py --seed 0 --nx 3 --ny 5
"""

import argparse

import numpy as np

from pdtradeoff.bounds import d_max, d_min
from pdtradeoff.model import square_error_measure
from pdtradeoff.synthetic import random_model
from pdtradeoff.tradeoff import constrained_solve, default_lambdas, trace_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--nx", type=int, default=3)
    ap.add_argument("--ny", type=int, default=5)
    ap.add_argument("--kinds", default="tv,kl,js,hellinger,chi2,w1")
    args = ap.parse_args()

    m = random_model(np.random.default_rng(args.seed), args.nx, args.ny)
    sq = square_error_measure(m.x_alphabet)
    lo, hi = d_min(m, sq).value, d_max(m, sq).value
    print(f"D_min={lo:.6f}  D_max={hi:.6f}")
    mid = 0.5 * (lo + hi)
    for kind in args.kinds.split(","):
        curve = trace_curve(m, sq, kind, default_lambdas())
        res = constrained_solve(m, sq, kind, mid)
        hull = ", ".join(f"({d:.4f}, {p:.4f})" for d, p in curve.envelope[:4])
        print(f"{kind:>9}: P({mid:.4f})={res.perception:.6f} via {res.how:<9} "
              f"envelope starts {hull}  flagged={len(curve.flagged)}")


if __name__ == "__main__":
    main()
