"""Static feasibility of a body pose in a stance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import BodyPose, Environment, RobotModel, collision_check, joint_violations, joints_for_points
from .tension import Infeasible, static_equilibrium_controls


@dataclass(frozen=True)
class Stance:
    """Boom index -> anchor id (None = detached). Identity is the assignment only."""
    anchors: tuple
    pose: Optional[BodyPose] = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        used = [a for a in self.anchors if a is not None]
        if len(set(used)) != len(used):
            raise ValueError(f"stance reuses an anchor: {self.anchors}")

    @property
    def attached(self) -> list:
        return [i for i, a in enumerate(self.anchors) if a is not None]

    def moved(self, boom: int, anchor: str) -> "Stance":
        a = list(self.anchors)
        a[boom] = anchor
        return Stance(tuple(a))

    def key(self) -> tuple:
        return tuple("" if a is None else str(a) for a in self.anchors)


@dataclass
class FeasibilityCertificate:
    ok: bool
    kind: Optional[str] = None  # "kinematic" | "collision" | "static"
    detail: str = ""
    controls: Optional[np.ndarray] = None
    joints: Optional[tuple] = None

    def __bool__(self) -> bool:
        return self.ok


def pose_feasible(model: RobotModel, pose: BodyPose, stance: Stance, env: Environment,
                  detached_boom: Optional[int] = None) -> FeasibilityCertificate:
    """Kinematic, collision and static check of `pose` in `stance`.

    With `detached_boom` the gripper of that boom is held (not attached) at its stance
    anchor: it still needs valid joints and its weight loads the body."""
    booms = [i for i, a in enumerate(stance.anchors) if a is not None]
    pts = env.positions([stance.anchors[i] for i in booms])
    pan, tilt, ext = joints_for_points(model, pose, pts, booms)
    bad = joint_violations(model, pan, tilt, ext)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        return FeasibilityCertificate(False, "kinematic",
                                      f"boom {booms[i]}: pan {pan[i]:.3f} tilt {tilt[i]:.3f} ext {ext[i]:.3f}")
    joints = (pan, tilt, ext)
    if collision_check(model, pose, None, env, booms=booms, tips=pts):
        return FeasibilityCertificate(False, "collision", "body or boom in contact", joints=joints)
    attached = [i for i in booms if i != detached_boom]
    att_pts = env.positions([stance.anchors[i] for i in attached])
    held = None
    if detached_boom is not None:
        if stance.anchors[detached_boom] is None:
            raise ValueError("detached boom needs a hold point in the stance")
        held = env.position(stance.anchors[detached_boom])
    try:
        tau = static_equilibrium_controls(model, pose, att_pts, attached, held)
    except Infeasible as exc:
        return FeasibilityCertificate(False, "static", f"{exc} {exc.violated}", joints=joints)
    return FeasibilityCertificate(True, controls=tau, joints=joints)
