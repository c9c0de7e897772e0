"""Closed-form perception-distortion curves of the scalar Gaussian example.

Writes one CSV per noise level and prints the landmarks (D_min, D_0 and the
divergence at D_min) of each curve.

    python3 scripts/gaussian_curves.py --out-dir out/gaussian
"""

import argparse
from pathlib import Path

from pdtradeoff.gaussian import GaussianSetting, gaussian_csv, linspace_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigmas", default="0.5,1,2", help="comma-separated noise levels")
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--out-dir", default="out/gaussian")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for sigma in (float(s) for s in args.sigmas.split(",")):
        s = GaussianSetting(sigma)
        grid = linspace_grid(s.d_min, s.d_0 + 0.25 * (s.d_0 - s.d_min), args.points)
        path = out / f"gaussian_sigma{sigma:g}.csv"
        path.write_text(gaussian_csv(sigma, grid))
        first = gaussian_csv(sigma, [s.d_min]).splitlines()[1].split(",")[2]
        print(f"sigma={sigma:g}  D_min={s.d_min:.6f}  D_0={s.d_0:.6f}  "
              f"P(D_min)={float(first):.6f}  -> {path}")


if __name__ == "__main__":
    main()
