"""Plan footsteps through a random corridor and optionally optimise the motion."""
import argparse

from boomclimb.footstep import NoPath, PlannerConfig, build_stance_graph, plan_footsteps
from boomclimb.model import RobotModel
from boomclimb.motion import plan_motion
from boomclimb.scenarios import random_corridor
from boomclimb.scp import ScpConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--anchors", type=int, default=12)
    ap.add_argument("--n-pose", type=int, default=10)
    ap.add_argument("--scp", action="store_true", help="also run the trajectory optimisation")
    args = ap.parse_args()

    model = RobotModel()
    env, start, goal = random_corridor(args.seed, args.anchors)
    graph = build_stance_graph(env, model, start, goal, PlannerConfig(n_pose=args.n_pose))
    try:
        plan = plan_footsteps(graph)
    except NoPath as exc:
        print(f"no path: {exc}")
        return
    print(f"{len(plan.transitions)} moves, cost {plan.cost}")
    for t in plan.transitions:
        print(f"  boom {t.boom}: {t.source.anchors[t.boom]} -> {t.target.anchors[t.boom]} "
              f"at {t.pose.position.round(3).tolist()}")
    if args.scp:
        for tr in plan_motion(plan, env, model, ScpConfig()):
            d = tr.diagnostics
            print(f"  {tr.phase:13s} steps {d['n_steps']:3d} iterations {d['iterations']:2d} "
                  f"converged {d['converged']}")


if __name__ == "__main__":
    main()
