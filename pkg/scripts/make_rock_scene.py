"""Write a synthetic point cloud of spherical rocks for `boomclimb perceive`."""
import argparse

import numpy as np

from boomclimb.perception import PointCloud, save_point_cloud, synthetic_sphere_cloud


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help=".ply or .csv path")
    ap.add_argument("--radii", type=float, nargs="+", default=[0.1, 0.17], help="m")
    ap.add_argument("--spacing", type=float, default=0.6, help="m between rock centres along x")
    ap.add_argument("--depth", type=float, default=1.0, help="m from the sensor")
    ap.add_argument("--noise", type=float, default=0.002)
    ap.add_argument("--outliers", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    offset = args.spacing * (len(args.radii) - 1) / 2
    parts = [synthetic_sphere_cloud(r, center=(args.spacing * i - offset, 0.0, args.depth), noise=args.noise,
                                    outlier_fraction=args.outliers, rng=rng).points
             for i, r in enumerate(args.radii)]
    save_point_cloud(PointCloud(np.vstack(parts)), args.out)
    print(f"wrote {sum(len(p) for p in parts)} points to {args.out}")


if __name__ == "__main__":
    main()
