"""Contact-before-motion footstep planning over 8-stances.

Vertices are full stances (every boom on a distinct anchor). An edge moves one boom to a
free anchor and is certified by a single body pose that is statically feasible in the
old stance, in the 7-stance holding the moving gripper at its old anchor, in the
7-stance holding it at the new anchor, and in the new stance.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .feasibility import FeasibilityCertificate, Stance, pose_feasible
from .geometry import quat_exp, quat_multiply
from .model import N_BOOMS, BodyPose, Environment, RobotModel, joint_violations, joints_for_points


class NotAdjacent(ValueError):
    pass


class NoFeasiblePose(Exception):
    pass


class NoPath(Exception):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    n_pose: int = 200  # perturbations tried after the anchor centroid
    sigma_position: float = 0.3  # m
    sigma_angle: float = np.radians(10)
    seed: int = 0
    cost: str = "transitions"  # or "travel"
    max_expansions: int = 100_000

    def __post_init__(self):
        if self.cost not in ("transitions", "travel"):
            raise ValueError("cost must be 'transitions' or 'travel'")


@dataclass(frozen=True)
class GoalRegion:
    center: tuple
    radius: float

    def contains(self, position) -> bool:
        return float(np.linalg.norm(np.asarray(position) - np.asarray(self.center))) <= self.radius


@dataclass(frozen=True, eq=False)
class TransitionCertificate:
    source: Stance
    target: Stance
    boom: Optional[int]
    pose: BodyPose
    checks: Tuple[FeasibilityCertificate, ...] = ()


@dataclass
class FootstepPlan:
    stances: List[Stance]
    transitions: List[TransitionCertificate]
    cost: float

    def moves(self) -> list:
        return [(t.boom, t.source.anchors[t.boom], t.target.anchors[t.boom]) for t in self.transitions]


def moved_boom(a: Stance, b: Stance) -> Optional[int]:
    diff = [i for i in range(N_BOOMS) if a.anchors[i] != b.anchors[i]]
    if len(diff) > 1:
        raise NotAdjacent(f"stances differ in booms {diff}")
    return diff[0] if diff else None


def _rng_for(*parts) -> np.random.Generator:
    h = hashlib.sha256(repr(parts).encode()).digest()
    return np.random.default_rng(int.from_bytes(h[:8], "little"))


def anchor_centroid(env: Environment, anchor_ids) -> np.ndarray:
    ids = sorted(set(a for a in anchor_ids if a is not None))
    return env.positions(ids).mean(axis=0)


def candidate_poses(env: Environment, anchor_ids, orientation, cfg: PlannerConfig, salt=(), offset=None):
    """Anchor centroid (shifted by `offset`) first, then seeded Gaussian perturbations of
    position and attitude."""
    ids = sorted(set(a for a in anchor_ids if a is not None))
    center = env.positions(ids).mean(axis=0)
    if offset is not None:
        center = center + np.asarray(offset, dtype=float)
    orientation = np.asarray(orientation, dtype=float)
    yield BodyPose(center, orientation)
    rng = _rng_for(cfg.seed, tuple(ids), salt)
    for _ in range(cfg.n_pose):
        dp = rng.normal(0.0, cfg.sigma_position, 3)
        dr = rng.normal(0.0, cfg.sigma_angle, 3)
        yield BodyPose(center + dp, quat_multiply(orientation, quat_exp(dr)))


def transition_checks(model, env, pose: BodyPose, a: Stance, b: Stance, boom: Optional[int]):
    """The four feasibility conditions, cheapest-to-fail order: a, b, a holding, b holding."""
    checks = [pose_feasible(model, pose, a, env)]
    if not checks[-1]:
        return checks
    if boom is None:
        return checks
    checks.append(pose_feasible(model, pose, b, env))
    if not checks[-1]:
        return checks
    checks.append(pose_feasible(model, pose, a, env, detached_boom=boom))
    if not checks[-1]:
        return checks
    checks.append(pose_feasible(model, pose, b, env, detached_boom=boom))
    return checks


def transition_feasible(a: Stance, b: Stance, model: RobotModel, env: Environment,
                        cfg: PlannerConfig = PlannerConfig(), orientation=None, offset=None) -> TransitionCertificate:
    """Search a pose meeting all four transition conditions; raises NoFeasiblePose.

    Candidates start at the centroid of the union of both stances' anchors plus `offset`."""
    boom = moved_boom(a, b)
    if orientation is None:
        orientation = a.pose.orientation if a.pose is not None else np.array([0.0, 0.0, 0.0, 1.0])
    lo, hi = sorted([a.key(), b.key()])
    union = list(a.anchors) + list(b.anchors)
    for pose in candidate_poses(env, union, orientation, cfg, salt=("edge", lo, hi), offset=offset):
        checks = transition_checks(model, env, pose, a, b, boom)
        if all(checks) and (boom is None or len(checks) == 4):
            return TransitionCertificate(a, b, boom, pose, tuple(checks))
    raise NoFeasiblePose(f"no pose certifies moving boom {boom} after {cfg.n_pose + 1} samples")


class StanceGraph:
    """Lazily expanded stance graph; all queries are cached and deterministic."""

    def __init__(self, model: RobotModel, env: Environment, start: Stance, goal: GoalRegion,
                 cfg: PlannerConfig = PlannerConfig(), orientation=None):
        if any(a is None for a in start.anchors) or len(start.anchors) != N_BOOMS:
            raise ValueError("start must assign every boom")
        self.model, self.env, self.goal, self.cfg = model, env, goal, cfg
        self.start = start
        if orientation is None:
            orientation = start.pose.orientation if start.pose is not None else np.array([0.0, 0.0, 0.0, 1.0])
        self.orientation = np.asarray(orientation, dtype=float)
        # body placement relative to the anchor centroid, taken from the start pose
        self.offset = np.zeros(3)
        if start.pose is not None:
            self.offset = np.asarray(start.pose.position, dtype=float) - anchor_centroid(env, start.anchors)
        self._rep: Dict[tuple, Optional[BodyPose]] = {}
        self._edges: Dict[tuple, Optional[TransitionCertificate]] = {}
        self._goal: Dict[tuple, bool] = {}
        if start.pose is not None and pose_feasible(model, start.pose, start, env):
            self._rep[start.key()] = start.pose
        if self.representative(start) is None:
            raise NoFeasiblePose("start stance has no feasible pose")

    def representative(self, s: Stance) -> Optional[BodyPose]:
        k = s.key()
        if k not in self._rep:
            self._rep[k] = None
            for pose in candidate_poses(self.env, s.anchors, self.orientation, self.cfg, salt=("vertex", k),
                                        offset=self.offset):
                if pose_feasible(self.model, pose, s, self.env):
                    self._rep[k] = pose
                    break
        return self._rep[k]

    def candidates(self, s: Stance) -> List[Stance]:
        """Single-boom reassignments to free anchors inside the boom's joint limits at the representative pose."""
        pose = self.representative(s)
        if pose is None:
            return []
        used = set(s.anchors)
        free = [a for a in self.env.anchors if a not in used]
        out = []
        if not free:
            return out
        pts = self.env.positions(free)
        for i in range(N_BOOMS):
            pan, tilt, ext = joints_for_points(self.model, pose, pts, [i] * len(free))
            ok = ~joint_violations(self.model, pan, tilt, ext)
            out.extend(s.moved(i, a) for a, good in zip(free, ok) if good)
        return sorted(out, key=lambda t: t.key())

    def certify(self, a: Stance, b: Stance) -> Optional[TransitionCertificate]:
        k = tuple(sorted([a.key(), b.key()]))
        if k not in self._edges:
            try:
                lo = a if a.key() <= b.key() else b
                hi = b if lo is a else a
                self._edges[k] = transition_feasible(lo, hi, self.model, self.env, self.cfg, self.orientation,
                                                     self.offset)
            except NoFeasiblePose:
                self._edges[k] = None
        cert = self._edges[k]
        if cert is None or cert.source.key() == a.key():
            return cert
        return TransitionCertificate(a, b, cert.boom, cert.pose, cert.checks)

    def neighbors(self, s: Stance) -> List[Tuple[Stance, TransitionCertificate]]:
        out = []
        for t in self.candidates(s):
            cert = self.certify(s, t)
            if cert is not None and self.representative(t) is not None:
                out.append((t, cert))
        return out

    def is_goal(self, s: Stance) -> bool:
        k = s.key()
        if k not in self._goal:
            rep = self.representative(s)
            self._goal[k] = rep is not None and self.goal.contains(rep.position)
        return self._goal[k]

    def edge_cost(self, a: Stance, b: Stance) -> float:
        if self.cfg.cost == "transitions":
            return 1.0
        return float(np.linalg.norm(self.representative(b).position - self.representative(a).position))


def build_stance_graph(env: Environment, model: RobotModel, start: Stance, goal: GoalRegion,
                       cfg: PlannerConfig = PlannerConfig(), orientation=None) -> StanceGraph:
    return StanceGraph(model, env, start, goal, cfg, orientation)


def plan_footsteps(graph: StanceGraph, start: Optional[Stance] = None) -> FootstepPlan:
    """Minimum-cost stance sequence to a goal stance (Dijkstra, ties by stance key)."""
    start = start or graph.start
    best = {start.key(): 0.0}
    parent: Dict[tuple, Tuple[Optional[tuple], Optional[TransitionCertificate], Stance]] = {start.key(): (None, None, start)}
    heap = [(0.0, start.key())]
    done = set()
    expansions = 0
    while heap:
        cost, k = heapq.heappop(heap)
        if k in done:
            continue
        done.add(k)
        s = parent[k][2]
        if graph.is_goal(s):
            return _unwind(parent, k, cost)
        expansions += 1
        if expansions > graph.cfg.max_expansions:
            break
        for t, cert in graph.neighbors(s):
            tk = t.key()
            c = cost + graph.edge_cost(s, t)
            if tk not in best or c < best[tk] or (c == best[tk] and k < parent[tk][0]):
                best[tk] = c
                parent[tk] = (k, cert, t)
                heapq.heappush(heap, (c, tk))
    raise NoPath("goal region is not reachable from the start stance")


def _unwind(parent, k, cost) -> FootstepPlan:
    stances, certs = [], []
    while k is not None:
        pk, cert, s = parent[k]
        stances.append(s)
        if cert is not None:
            certs.append(cert)
        k = pk
    return FootstepPlan(stances[::-1], certs[::-1], float(cost))
