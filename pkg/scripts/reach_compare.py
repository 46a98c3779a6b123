"""Reachable area of the five finger designs on a built-in or loaded mesh."""
import argparse
import math
import time

from boomclimb.mesh import hemisphere_mesh, ledge_mesh, load_mesh
from boomclimb.reachability import base_pose_for, cases_csv, compare_cases, finger_cases

TARGETS = {
    "hemisphere": (lambda: hemisphere_mesh(0.1), (0.0, 0.0, 0.1)),
    "ledge": (ledge_mesh, (0.03 * math.sin(math.pi / 4), 0.0, -0.03 + 0.03 * math.cos(math.pi / 4))),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("mesh", help="'hemisphere', 'ledge' or a .stl/.obj path")
    ap.add_argument("--target", type=float, nargs=3, help="grasp point (m); required for loaded meshes")
    ap.add_argument("--refine", type=int, default=1, help="divide the joint grid steps by this factor")
    args = ap.parse_args()

    if args.mesh in TARGETS:
        make, target = TARGETS[args.mesh]
        mesh = make()
    else:
        mesh, target = load_mesh(args.mesh), None
    target = args.target or target
    if target is None:
        ap.error("--target is needed for a loaded mesh")
    cases = [c.refined(args.refine) for c in finger_cases()] if args.refine > 1 else None
    t0 = time.perf_counter()
    res = compare_cases(mesh, base_pose_for(mesh, target), cases)
    print(cases_csv(res), end="")
    print(f"# {len(mesh)} faces, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
