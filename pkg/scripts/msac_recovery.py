"""How often MSAC recovers a sphere's radius to 5% under noise and outliers."""
import argparse

from boomclimb.perception import MsacConfig, find_sphere_candidates, synthetic_sphere_cloud


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radius", type=float, default=0.17, help="m")
    ap.add_argument("--noise", type=float, default=0.002, help="m")
    ap.add_argument("--outliers", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.5])
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--voxel", type=float, default=0.005)
    args = ap.parse_args()

    print("outlier_fraction,recovered,runs")
    for frac in args.outliers:
        hits = 0
        for seed in range(args.runs):
            pc = synthetic_sphere_cloud(args.radius, noise=args.noise, outlier_fraction=frac, rng=seed)
            cands = find_sphere_candidates(pc, args.voxel, MsacConfig(seed=seed))
            hits += bool(cands) and abs(cands[0].radius - args.radius) <= 0.05 * args.radius
        print(f"{frac},{hits},{args.runs}")


if __name__ == "__main__":
    main()
