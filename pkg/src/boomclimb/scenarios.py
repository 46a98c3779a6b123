"""Synthetic tunnel environments used by the planners, tests and scripts."""

from __future__ import annotations

import numpy as np

from .feasibility import Stance
from .footstep import GoalRegion
from .model import Anchor, BodyPose, Environment, Protrusion, Tunnel

# nominal wall angles (0 = +y, pi/2 = +z) of the anchors each boom group grasps
SIDE_ANGLE = {"L": np.radians(20), "R": np.radians(160), "T": np.radians(90)}
BOOM_SIDE = ("L", "L", "L", "R", "R", "R", "T", "T")


def start_anchors(tunnel: Tunnel, x0: float = 0.0, spread: float = 0.6) -> list:
    out = [Anchor(f"L{i}", tunnel.wall_point(x0 + x, SIDE_ANGLE["L"])) for i, x in enumerate((-spread, 0.0, spread))]
    out += [Anchor(f"R{i}", tunnel.wall_point(x0 + x, SIDE_ANGLE["R"])) for i, x in enumerate((-spread, 0.0, spread))]
    out += [Anchor(f"T{i}", tunnel.wall_point(x0 + x, SIDE_ANGLE["T"])) for i, x in enumerate((-spread, spread))]
    return out


def tunnel_scenario(radius: float = 2.0, extra=(), protrusions=()):
    """Eight start anchors around a body at the origin plus optional `extra` anchors.

    Returns (env, start stance with pose at the origin)."""
    tunnel = Tunnel(radius, protrusions=tuple(protrusions))
    anchors = start_anchors(tunnel) + list(extra)
    env = Environment(anchors, tunnel)
    start = Stance(tuple(a.id for a in anchors[:8]), BodyPose.at(0.0, 0.0, 0.0))
    return env, start


def random_corridor(seed: int, n_anchors: int = 12, radius: float = 2.0, reach=(0.4, 1.8),
                    goal_x: float = 0.45, goal_radius: float = 0.2):
    """Start stance plus up to four anchors scattered ahead along the tunnel; goal ahead of the start."""
    if not 8 <= n_anchors <= 12:
        raise ValueError("corridor scenarios use 8 to 12 anchors")
    rng = np.random.default_rng(seed)
    tunnel = Tunnel(radius)
    extra = []
    for k in range(n_anchors - 8):
        side = ("L", "R", "T")[rng.integers(3)]
        x = rng.uniform(*reach)
        ang = SIDE_ANGLE[side] + rng.uniform(-0.25, 0.25)
        extra.append(Anchor(f"X{k}", tunnel.wall_point(x, ang)))
    env, start = tunnel_scenario(radius, extra)
    return env, start, GoalRegion((goal_x, 0.0, 0.0), goal_radius)


def bead(x: float, angle: float, radius: float, tunnel_radius: float = 2.0, depth: float = 0.0) -> Protrusion:
    """Spherical bump centred `depth` inside the wall at (x, angle)."""
    t = Tunnel(tunnel_radius)
    p = t.wall_point(x, angle)
    inward = -(p - np.array([p[0], 0.0, 0.0]))
    inward /= np.linalg.norm(inward)
    return Protrusion(p + depth * inward, radius)
