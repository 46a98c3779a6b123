"""Mean pull-out force at beta = 0 across closure angles and grip forces.

    python scripts/limit_surface_sweep.py --n-mc 100 --out sweep.csv
"""
import argparse
import math

import numpy as np

from boomclimb.grasp import field_test_scenario
from boomclimb.limit_surface import MonteCarloConfig, build_limit_surface


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 20.0, 38.6, 60.0], help="deg")
    ap.add_argument("--f-int", type=float, nargs="+", default=[2.0, 6.0, 10.0], help="N")
    ap.add_argument("--n-mc", type=int, default=100)
    ap.add_argument("--n-grid", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="CSV path (default: print)")
    args = ap.parse_args()

    cfg = MonteCarloConfig(n_grid=args.n_grid, n_mc=args.n_mc, seed=args.seed)
    rows = ["alpha_deg,f_int,mean_axial,mean_all,p5_all,capped_fraction"]
    for a in args.alphas:
        for f in args.f_int:
            ls = build_limit_surface(field_test_scenario(alpha=math.radians(a), f_int=f), cfg)
            rows.append(f"{a},{f},{ls.mean[0].mean():.3f},{ls.mean.mean():.3f},"
                        f"{np.mean(ls.percentiles[5.0]):.3f},{ls.capped_fraction:.4f}")
    text = "\n".join(rows) + "\n"
    if args.out:
        open(args.out, "w").write(text)
    print(text, end="")


if __name__ == "__main__":
    main()
