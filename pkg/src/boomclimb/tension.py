"""Boom tension allocation.

The controls of the attached booms are stacked as ``[F, M_pan, M_tilt]`` per boom
(ascending boom index). A desired wrench is realised by a particular solution plus a
null-space combination chosen by a linear program that keeps every boom in tension and
minimises ``sum |F| + (1 / l_char) * sum (|M_pan| + |M_tilt|)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .model import ActuationLimits, BodyPose, RobotModel, grasp_map_points

# bounds are tightened by this much inside the LP so the returned vector meets the
# nominal bounds exactly despite solver feasibility tolerances
_BOUND_MARGIN = 1e-6


class Infeasible(Exception):
    def __init__(self, message: str, violated: Sequence[str] = ()):
        super().__init__(message)
        self.violated = list(violated)


@dataclass(frozen=True, eq=False)
class Wrench:
    force: np.ndarray
    moment: np.ndarray

    @classmethod
    def from_vector(cls, w) -> "Wrench":
        w = np.asarray(w, dtype=float)
        return cls(w[:3].copy(), w[3:].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.moment])


def control_weights(n_booms: int, char_length: float) -> np.ndarray:
    return np.tile([1.0, 1.0 / char_length, 1.0 / char_length], n_booms)


def nullspace_basis(gmap: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (n, k) of {tau : gmap @ tau = 0}."""
    gmap = np.atleast_2d(gmap)
    n = gmap.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    _, s, vt = np.linalg.svd(gmap)
    tol = rtol * (s[0] if len(s) else 0.0) * max(gmap.shape)
    rank = int(np.sum(s > tol))
    return vt[rank:].T.copy()


def allocate_wrench(gmap: np.ndarray, wrench, limits: ActuationLimits = ActuationLimits(),
                    min_tension: float = 1.0, char_length: float = 0.8) -> np.ndarray:
    """Tension-consistent, effort-minimal controls with ``gmap @ tau = wrench``."""
    W = wrench.as_vector() if isinstance(wrench, Wrench) else np.asarray(wrench, dtype=float)
    gmap = np.atleast_2d(np.asarray(gmap, dtype=float))
    n = gmap.shape[1]
    nb = n // 3
    if n == 0:
        if np.linalg.norm(W) > 1e-9:
            raise Infeasible("no attached booms", ["wrench_range"])
        return np.zeros(0)
    tau0 = np.linalg.lstsq(gmap, W, rcond=None)[0]
    if np.linalg.norm(gmap @ tau0 - W) > 1e-9 * (1.0 + np.linalg.norm(W)):
        raise Infeasible("desired wrench is outside the range of the grasp map", ["wrench_range"])
    N = nullspace_basis(gmap)
    k = N.shape[1]

    f_lo = max(limits.prismatic_force_range[0], min_tension) + _BOUND_MARGIN
    f_hi = limits.prismatic_force_range[1] - _BOUND_MARGIN
    m_lo = limits.moment_range[0] + _BOUND_MARGIN
    m_hi = limits.moment_range[1] - _BOUND_MARGIN
    if f_lo > f_hi or m_lo > m_hi:
        raise Infeasible("empty actuation box", ["force_bounds"])
    fi = np.arange(0, n, 3)
    mi = np.sort(np.concatenate([fi + 1, fi + 2]))
    nm = len(mi)

    # variables: [C (k), t (nm)], tau = tau0 + N C, |M| <= t
    c = np.concatenate([N[fi].sum(axis=0), np.full(nm, 1.0 / char_length)])
    rows, rhs, labels = [], [], []

    def add(block_c, block_t, b, label):
        rows.append(np.concatenate([block_c, block_t]))
        rhs.append(b)
        labels.append(label)

    zt = np.zeros(nm)
    for j, i in enumerate(fi):
        add(-N[i], zt, tau0[i] - f_lo, f"boom{j}:tension_min")
        add(N[i], zt, f_hi - tau0[i], f"boom{j}:force_max")
    for j, i in enumerate(mi):
        e = np.zeros(nm)
        e[j] = 1.0
        add(N[i], -e, -tau0[i], f"m{j}:abs_pos")
        add(-N[i], -e, tau0[i], f"m{j}:abs_neg")
        add(N[i], zt, m_hi - tau0[i], f"boom{j // 2}:moment_max")
        add(-N[i], zt, tau0[i] - m_lo, f"boom{j // 2}:moment_min")
    A_ub = np.array(rows)
    b_ub = np.array(rhs)
    bounds = [(None, None)] * k + [(0, None)] * nm
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise Infeasible("no tension-consistent allocation", _diagnose(A_ub, b_ub, k, nm, labels))
    tau = tau0 + N @ res.x[:k]
    # the LP kept a margin; clip residual float noise onto the nominal box
    tau[fi] = np.clip(tau[fi], max(limits.prismatic_force_range[0], min_tension), limits.prismatic_force_range[1])
    tau[mi] = np.clip(tau[mi], limits.moment_range[0], limits.moment_range[1])
    return tau


def _diagnose(A_ub, b_ub, k, nm, labels):
    """Constraints that must be relaxed in the least-violation solution."""
    m = len(b_ub)
    c = np.concatenate([np.zeros(k + nm), np.ones(m)])
    A = np.hstack([A_ub, -np.eye(m)])
    bounds = [(None, None)] * k + [(0, None)] * nm + [(0, None)] * m
    res = linprog(c, A_ub=A, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return ["unknown"]
    slack = res.x[k + nm:]
    return sorted({labels[i] for i in np.flatnonzero(slack > 1e-7) if not labels[i].startswith("m")})


def gravity_wrench(model: RobotModel, pose: BodyPose, detached_point: Optional[np.ndarray] = None,
                   gripper_mass: Optional[float] = None) -> Wrench:
    """Wrench the attached booms must supply to hold the body (and a detached gripper) still."""
    g = model.gravity
    force = np.array([0.0, 0.0, model.mass_body * g])
    moment = np.zeros(3)
    if detached_point is not None:
        mg = model.mass_gripper if gripper_mass is None else gripper_mass
        lift = np.array([0.0, 0.0, mg * g])
        force = force + lift
        moment = np.cross(np.asarray(detached_point, dtype=float) - pose.position, lift)
    return Wrench(force, moment)


def static_equilibrium_controls(model: RobotModel, pose: BodyPose, anchor_points: np.ndarray,
                                attached: Sequence[int], detached_point: Optional[np.ndarray] = None) -> np.ndarray:
    """Controls for the attached booms (`attached` boom indices, grippers at `anchor_points`)
    that cancel gravity on the body and on an optional detached gripper at `detached_point`."""
    G = grasp_map_points(model, pose, anchor_points, attached)
    W = gravity_wrench(model, pose, detached_point)
    return allocate_wrench(G, W, model.actuation_limits, model.min_tension, model.body_length)
