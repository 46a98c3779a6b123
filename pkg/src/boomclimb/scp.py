"""Continuous motion between stances by sequential convex programming.

The state is ``S = [X (3), Q (4, scalar-last), P (3), L (3)]`` with world-frame linear and
angular momentum. Subproblems are posed in a 12-dimensional error state about the
previous iterate (orientation error as a body-frame rotation vector) and solved as
second-order cone programs.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import cvxpy as cp
import numpy as np

from .feasibility import Stance, pose_feasible
from .geometry import quat_conj, quat_exp, quat_log, quat_multiply
from .model import BodyPose, Environment, RobotModel, collision_check, grasp_map_points, joint_violations, joints_for_points
from .tension import Infeasible, gravity_wrench, static_equilibrium_controls

NX = 13
NE = 12
_BOUND_MARGIN = 1e-7


class NotConverged(Exception):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SubproblemInfeasible(Exception):
    pass


class SeedFailed(Exception):
    pass


@dataclass(frozen=True)
class ScpConfig:
    lambda_state: float = 10.0
    lambda_control: float = 10.0
    max_iterations: int = 60
    tolerance: float = 1e-6  # max change of the trajectory between iterations
    defect_tolerance: float = 1e-4
    dt: float = 0.5
    step: float = 0.05  # m, waypoint spacing of seeds
    angle_step: float = np.radians(3)
    seed_budget: int = 200
    seed_sigma: float = 0.05
    penalty: float = 1e3  # merit weight on the rollout defect
    solver: str = "CLARABEL"
    seed: int = 0

    def __post_init__(self):
        if self.lambda_state <= 0 or self.lambda_control <= 0:
            raise ValueError("trust weights must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


# ------------------------------------------------------------------ state algebra

def pack_state(position, orientation, momentum=(0, 0, 0), angular_momentum=(0, 0, 0)) -> np.ndarray:
    q = np.asarray(orientation, dtype=float)
    return np.concatenate([np.asarray(position, float), q / np.linalg.norm(q),
                           np.asarray(momentum, float), np.asarray(angular_momentum, float)])


def rest_state(pose: BodyPose) -> np.ndarray:
    return pack_state(pose.position, pose.orientation)


def state_pose(S) -> BodyPose:
    return BodyPose(np.asarray(S[:3], float), np.asarray(S[3:7], float))


def retract(S, d) -> np.ndarray:
    """S (+) d with d = [dX, d_theta (body frame), dP, dL]."""
    q = quat_multiply(S[3:7], quat_exp(d[3:6]))
    return np.concatenate([S[:3] + d[:3], q / np.linalg.norm(q), S[7:10] + d[6:9], S[10:13] + d[9:12]])


def difference(S, R) -> np.ndarray:
    """S (-) R, the error state taking R to S."""
    dq = quat_log(quat_multiply(quat_conj(R[3:7]), S[3:7]))
    return np.concatenate([S[:3] - R[:3], dq, S[7:10] - R[7:10], S[10:13] - R[10:13]])


# ------------------------------------------------------------------ dynamics

@dataclass(frozen=True, eq=False)
class Phase:
    """Fixed data of one continuous phase: which booms pull on which anchors, and an
    optional detached gripper whose weight acts at a prescribed point per step."""
    model: RobotModel
    booms: tuple
    anchor_points: np.ndarray
    detached_boom: Optional[int] = None
    gripper_path: Optional[np.ndarray] = None  # (n, 3)

    @property
    def n_controls(self) -> int:
        return 3 * len(self.booms)

    def external_wrench(self, pose: BodyPose, k: int) -> np.ndarray:
        """Gravity on the body plus the detached gripper's weight at step k."""
        pt = None if self.gripper_path is None else self.gripper_path[k]
        support = gravity_wrench(self.model, pose, pt)
        return -support.as_vector()


def nonlinear_step(S, tau, dt: float, phase: Phase, k: int = 0) -> np.ndarray:
    """Semi-implicit Euler step of the rigid body under boom controls and gravity."""
    model = phase.model
    pose = state_pose(S)
    G = grasp_map_points(model, pose, phase.anchor_points, phase.booms)
    w = G @ np.asarray(tau, float) + phase.external_wrench(pose, k)
    P = S[7:10] + dt * w[:3]
    L = S[10:13] + dt * w[3:]
    X = S[:3] + dt * P / model.mass_body
    R = pose.rotation
    omega = R @ np.linalg.solve(model.inertia_body, R.T @ L)
    q = quat_multiply(quat_exp(omega * dt), S[3:7])
    return np.concatenate([X, q / np.linalg.norm(q), P, L])


def _linearize(S, S_next, tau, dt, phase, k, h=1e-6):
    """Central differences of g(d, du) = step(S (+) d, tau + du) (-) S_next."""
    m = len(tau)
    c = difference(nonlinear_step(S, tau, dt, phase, k), S_next)
    A = np.empty((NE, NE))
    B = np.empty((NE, m))
    for j in range(NE):
        e = np.zeros(NE)
        e[j] = h
        A[:, j] = (difference(nonlinear_step(retract(S, e), tau, dt, phase, k), S_next)
                   - difference(nonlinear_step(retract(S, -e), tau, dt, phase, k), S_next)) / (2 * h)
    hu = h * max(1.0, float(np.abs(tau).max(initial=0.0)))
    for j in range(m):
        e = np.zeros(m)
        e[j] = hu
        B[:, j] = (difference(nonlinear_step(S, tau + e, dt, phase, k), S_next)
                   - difference(nonlinear_step(S, tau - e, dt, phase, k), S_next)) / (2 * hu)
    return c, A, B


# ------------------------------------------------------------------ joints

def _joint_rows(phase: Phase, k: int):
    booms = list(phase.booms)
    pts = [np.asarray(phase.anchor_points, float).reshape(-1, 3)]
    if phase.detached_boom is not None and phase.gripper_path is not None:
        booms.append(phase.detached_boom)
        pts.append(np.asarray(phase.gripper_path[k], float)[None])
    return np.vstack(pts), booms


def joint_values(phase: Phase, S, k: int):
    pts, booms = _joint_rows(phase, k)
    return joints_for_points(phase.model, state_pose(S), pts, booms)


def _joint_linearization(phase, S, k, h=1e-6):
    """Tilt and extension and their derivatives wrt the pose part of the error state."""
    _, tilt, ext = joint_values(phase, S, k)
    Jt = np.empty((len(tilt), 6))
    Je = np.empty((len(ext), 6))
    for j in range(6):
        e = np.zeros(NE)
        e[j] = h
        _, tp, ep = joint_values(phase, retract(S, e), k)
        _, tm, em = joint_values(phase, retract(S, -e), k)
        Jt[:, j] = (tp - tm) / (2 * h)
        Je[:, j] = (ep - em) / (2 * h)
    return tilt, ext, Jt, Je


def joint_violation_count(phase: Phase, states) -> int:
    bad = 0
    for k, S in enumerate(states):
        pan, tilt, ext = joint_values(phase, S, k)
        bad += int(joint_violations(phase.model, pan, tilt, ext).sum())
    return bad


# ------------------------------------------------------------------ trajectory

@dataclass(eq=False)
class Trajectory:
    dt: float
    states: np.ndarray  # (n, 13)
    controls: np.ndarray  # (n - 1, 3 * attached)
    phase: str  # "body" | "end_effector"
    booms: tuple
    moved_boom: Optional[int] = None
    gripper_path: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.states))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["t", "x", "y", "z", "qx", "qy", "qz", "qw", "px", "py", "pz", "lx", "ly", "lz"]
        for b in self.booms:
            head += [f"F{b}", f"Mpan{b}", f"Mtilt{b}"]
        if self.gripper_path is not None:
            head += ["gx", "gy", "gz"]
        w.writerow(head)
        for k, S in enumerate(self.states):
            row = [repr(float(self.times[k]))] + [repr(float(v)) for v in S]
            if k < len(self.controls):
                row += [repr(float(v)) for v in self.controls[k]]
            else:
                row += [""] * self.controls.shape[1]
            if self.gripper_path is not None:
                row += [repr(float(v)) for v in self.gripper_path[k]]
            w.writerow(row)
        return buf.getvalue()

    def diagnostics_json(self) -> str:
        return json.dumps(self.diagnostics, indent=2, sort_keys=True)


def rollout_defects(states, controls, dt, phase: Phase) -> np.ndarray:
    """Per step (position m, rotation rad, momentum, angular momentum) defect norms."""
    out = np.zeros((len(controls), 4))
    for k in range(len(controls)):
        d = difference(nonlinear_step(states[k], controls[k], dt, phase, k), states[k + 1])
        out[k] = [np.linalg.norm(d[:3]), np.linalg.norm(d[3:6]), np.linalg.norm(d[6:9]), np.linalg.norm(d[9:])]
    return out


def control_bounds(model: RobotModel, n_booms: int):
    lim = model.actuation_limits
    f_lo = max(lim.prismatic_force_range[0], model.min_tension)
    lo = np.tile([f_lo, lim.moment_range[0], lim.moment_range[0]], n_booms)
    hi = np.tile([lim.prismatic_force_range[1], lim.moment_range[1], lim.moment_range[1]], n_booms)
    return lo, hi


def _merit(states, controls, dt, phase, penalty):
    d = rollout_defects(states, controls, dt, phase)
    return float(np.linalg.norm(controls, axis=1).sum() + penalty * d.sum()), d


def _subproblem(states, controls, dt, phase, lam_s, lam_u, solver):
    n = len(states)
    m = phase.n_controls
    model = phase.model
    lo, hi = control_bounds(model, len(phase.booms))
    lim = model.joint_limits
    d = cp.Variable((n, NE))
    du = cp.Variable((n - 1, m))
    cons = [d[0] == 0, d[n - 1] == 0]
    for k in range(n - 1):
        c, A, B = _linearize(states[k], states[k + 1], controls[k], dt, phase, k)
        cons.append(d[k + 1] == c + A @ d[k] + B @ du[k])
    u = controls + du
    cons += [u >= lo + _BOUND_MARGIN, u <= hi - _BOUND_MARGIN]
    for k in range(1, n - 1):
        tilt, ext, Jt, Je = _joint_linearization(phase, states[k], k)
        cons += [tilt + Jt @ d[k, :6] <= lim.tilt_range[1],
                 ext + Je @ d[k, :6] >= lim.extension_range[0],
                 ext + Je @ d[k, :6] <= lim.extension_range[1]]
    obj = (cp.sum(cp.norm(u, 2, axis=1))
           + lam_s * cp.sum(cp.norm(d, 2, axis=1))
           + lam_u * cp.sum(cp.norm(du, 2, axis=1)))
    prob = cp.Problem(cp.Minimize(obj), cons)
    try:
        prob.solve(solver=solver, canon_backend=cp.SCIPY_CANON_BACKEND)
    except cp.error.SolverError as exc:
        raise SubproblemInfeasible(str(exc)) from exc
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SubproblemInfeasible(f"convex subproblem status: {prob.status}")
    new_states = states.copy()
    for k in range(1, n - 1):
        new_states[k] = retract(states[k], d.value[k])
    new_controls = np.clip(controls + du.value, lo, hi)
    return new_states, new_controls


def scp_optimize(states, controls, phase: Phase, cfg: ScpConfig = ScpConfig()):
    """Trust-penalized SCP from a seed. Returns (states, controls, diagnostics).

    The first and last states are held fixed. A step is accepted when the merit
    (control effort plus penalized rollout defect) does not increase and every joint
    stays within limits; accepted steps halve the trust weights, rejected ones double them."""
    t0 = time.perf_counter()
    states = np.array(states, dtype=float)
    controls = np.array(controls, dtype=float).reshape(len(states) - 1, phase.n_controls)
    lo, hi = control_bounds(phase.model, len(phase.booms))
    controls = np.clip(controls, lo, hi)
    lam_s, lam_u = cfg.lambda_state, cfg.lambda_control
    merit, defects = _merit(states, controls, cfg.dt, phase, cfg.penalty)
    trace = [merit]
    accepted = rejected = 0
    converged = False
    change = np.inf
    for it in range(cfg.max_iterations):
        new_s, new_u = _subproblem(states, controls, cfg.dt, phase, lam_s, lam_u, cfg.solver)
        change = max(float(np.abs([difference(a, b) for a, b in zip(new_s, states)]).max()),
                     float(np.abs(new_u - controls).max(initial=0.0)))
        new_merit, new_def = _merit(new_s, new_u, cfg.dt, phase, cfg.penalty)
        ok = new_merit <= merit + 1e-12 * max(1.0, abs(merit)) and joint_violation_count(phase, new_s) == 0
        if ok:
            states, controls, merit, defects = new_s, new_u, new_merit, new_def
            trace.append(merit)
            accepted += 1
            lam_s, lam_u = lam_s / 2, lam_u / 2
        else:
            rejected += 1
            lam_s, lam_u = lam_s * 2, lam_u * 2
        if change < cfg.tolerance and defects[:, :2].max(initial=0.0) <= cfg.defect_tolerance:
            converged = True
            break
    diag = {
        "converged": converged,
        "iterations": it + 1,
        "accepted": accepted,
        "rejected": rejected,
        "objective_trace": trace,
        "final_change": change,
        "max_position_defect": float(defects[:, 0].max(initial=0.0)),
        "max_rotation_defect": float(defects[:, 1].max(initial=0.0)),
        "max_momentum_defect": float(defects[:, 2:].max(initial=0.0)),
        "n_steps": len(states),
        "wall_time": time.perf_counter() - t0,
    }
    return states, controls, diag


# ------------------------------------------------------------------ seeds

def _stance_phase(model, stance: Stance, env: Environment, detached=None, path=None) -> Phase:
    booms = tuple(i for i in stance.attached if i != detached)
    pts = env.positions([stance.anchors[i] for i in booms])
    return Phase(model, booms, pts, detached, None if path is None else np.asarray(path, float))


def _slerp(q0, q1, s):
    return quat_multiply(q0, quat_exp(s * quat_log(quat_multiply(quat_conj(q0), q1))))


def _pose_distance(a: BodyPose, b: BodyPose):
    return (float(np.linalg.norm(a.position - b.position)),
            float(np.linalg.norm(quat_log(quat_multiply(quat_conj(a.orientation), b.orientation)))))


def seed_trajectory(start: BodyPose, goal: BodyPose, stance: Stance, env: Environment, model: RobotModel,
                    cfg: ScpConfig = ScpConfig()) -> List[BodyPose]:
    """Statically feasible waypoints from start to goal, at most one step apart.

    Straight-line points are used where feasible; otherwise Gaussian perturbations of
    the line point are tried (within the step bound of the previous waypoint), keeping
    the one closest to the goal."""
    for p, name in ((start, "start"), (goal, "goal")):
        if not pose_feasible(model, p, stance, env):
            raise SeedFailed(f"{name} pose is not statically feasible")
    rng = np.random.default_rng(cfg.seed)
    out = [BodyPose(np.asarray(start.position, float), np.asarray(start.orientation, float))]
    budget = cfg.seed_budget
    while True:
        cur = out[-1]
        dx, da = _pose_distance(cur, goal)
        if dx <= cfg.step + 1e-12 and da <= cfg.angle_step + 1e-12:
            if dx > 0 or da > 0:
                out.append(goal)
            return out
        s = min(1.0, cfg.step / dx if dx > 0 else 1.0, cfg.angle_step / da if da > 0 else 1.0)
        target = BodyPose(cur.position + s * (goal.position - cur.position), _slerp(cur.orientation, goal.orientation, s))
        if pose_feasible(model, target, stance, env):
            out.append(target)
            continue
        best = None
        while budget > 0:
            budget -= 1
            cand = BodyPose(target.position + rng.normal(0.0, cfg.seed_sigma, 3), target.orientation)
            if np.linalg.norm(cand.position - cur.position) > cfg.step:
                continue
            if pose_feasible(model, cand, stance, env):
                if best is None or np.linalg.norm(cand.position - goal.position) < np.linalg.norm(best.position - goal.position):
                    best = cand
                if np.linalg.norm(cand.position - goal.position) < dx - 0.25 * cfg.step:
                    break
        if best is None or np.linalg.norm(best.position - goal.position) >= dx:
            raise SeedFailed("perturbation budget exhausted before reaching the goal")
        out.append(best)


def seed_gripper_path(model: RobotModel, pose: BodyPose, boom: int, source, target, env: Environment,
                      cfg: ScpConfig = ScpConfig()) -> np.ndarray:
    """Straight gripper path from `source` to `target`, pushed off obstacles by local sampling."""
    a, b = np.asarray(source, float), np.asarray(target, float)
    n = max(2, int(np.ceil(np.linalg.norm(b - a) / cfg.step)) + 1)
    rng = np.random.default_rng(cfg.seed)
    path = [a + (b - a) * s for s in np.linspace(0.0, 1.0, n)]

    def ok(p):
        pan, tilt, ext = joints_for_points(model, pose, p[None], [boom])
        return not joint_violations(model, pan, tilt, ext).any() and not collision_check(
            model, pose, None, env, booms=[boom], tips=p[None])

    for k in range(1, n - 1):
        if ok(path[k]):
            continue
        for _ in range(cfg.seed_budget):
            cand = path[k] + rng.normal(0.0, cfg.seed_sigma, 3)
            if ok(cand):
                path[k] = cand
                break
        else:
            raise SeedFailed(f"gripper waypoint {k} stays in collision")
    return np.array(path)


def _seed_controls(model, phase: Phase, poses):
    out = []
    for k, pose in enumerate(poses[:-1]):
        held = None if phase.gripper_path is None else phase.gripper_path[k]
        try:
            out.append(static_equilibrium_controls(model, pose, phase.anchor_points, phase.booms, held))
        except Infeasible:
            out.append(out[-1] if out else np.tile([model.min_tension, 0, 0], len(phase.booms)))
    return np.array(out).reshape(len(poses) - 1, phase.n_controls)


# ------------------------------------------------------------------ solves

def _finish(states, controls, diag, phase: Phase, cfg, kind, moved=None):
    traj = Trajectory(cfg.dt, states, controls, kind, phase.booms, moved, phase.gripper_path, diag)
    if not diag["converged"]:
        raise NotConverged(f"SCP stopped after {diag['iterations']} iterations", best=traj)
    return traj


def scp_solve_body(seed: Sequence[BodyPose], stance: Stance, env: Environment, model: RobotModel,
                   cfg: ScpConfig = ScpConfig()) -> Trajectory:
    """Dynamically feasible body motion through the seed waypoints' endpoints, all booms attached."""
    poses = list(seed)
    if len(poses) == 1:
        poses = poses * 2
    phase = _stance_phase(model, stance, env)
    states = np.array([rest_state(p) for p in poses])
    controls = _seed_controls(model, phase, poses)
    s, u, diag = scp_optimize(states, controls, phase, cfg)
    return _finish(s, u, diag, phase, cfg, "body")


def scp_solve_end_effector(gripper_path, stance: Stance, boom: int, pose: BodyPose, env: Environment,
                           model: RobotModel, cfg: ScpConfig = ScpConfig()) -> Trajectory:
    """Body stays near `pose` while boom `boom` carries its gripper along `gripper_path`.

    `stance` lists the anchors of the other seven booms; the entry for `boom` is ignored."""
    path = np.asarray(gripper_path, float)
    phase = _stance_phase(model, stance, env, detached=boom, path=path)
    poses = [pose] * len(path)
    states = np.array([rest_state(p) for p in poses])
    controls = _seed_controls(model, phase, poses)
    s, u, diag = scp_optimize(states, controls, phase, cfg)
    return _finish(s, u, diag, phase, cfg, "end_effector", boom)


def trajectory_bound_violations(traj: Trajectory, model: RobotModel, env: Environment, stance: Stance) -> dict:
    """Exact count of control, tension and joint-limit violations along a trajectory."""
    phase = _stance_phase(model, stance, env, detached=traj.moved_boom, path=traj.gripper_path)
    lo, hi = control_bounds(model, len(phase.booms))
    u = traj.controls
    return {
        "controls": int(np.sum((u < lo) | (u > hi))),
        "tension": int(np.sum(u[:, 0::3] < model.min_tension)),
        "joints": joint_violation_count(phase, traj.states),
    }
