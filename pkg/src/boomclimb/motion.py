"""Footstep plan -> alternating body and end-effector trajectories."""

from __future__ import annotations

from typing import List

from .footstep import FootstepPlan
from .model import Environment, RobotModel
from .scp import ScpConfig, Trajectory, scp_solve_body, scp_solve_end_effector, seed_gripper_path, seed_trajectory


def plan_motion(plan: FootstepPlan, env: Environment, model: RobotModel, cfg: ScpConfig = ScpConfig()) -> List[Trajectory]:
    """For every transition: move the body to the certified pose with all booms attached,
    then carry the moving gripper from its old anchor to the new one."""
    out = []
    if not plan.stances:
        return out
    pose = plan.stances[0].pose
    for cert in plan.transitions:
        seed = seed_trajectory(pose, cert.pose, cert.source, env, model, cfg)
        out.append(scp_solve_body(seed, cert.source, env, model, cfg))
        src = env.position(cert.source.anchors[cert.boom])
        dst = env.position(cert.target.anchors[cert.boom])
        path = seed_gripper_path(model, cert.pose, cert.boom, src, dst, env, cfg)
        out.append(scp_solve_end_effector(path, cert.source, cert.boom, cert.pose, env, model, cfg))
        pose = cert.pose
    return out
