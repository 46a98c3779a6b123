"""Independent reference implementations used by the tests.

Each oracle recomputes a quantity by a different route than the package: plain loops
instead of vectorized code, explicit 3D geometry instead of assembled matrices,
exhaustive search instead of Dijkstra."""

from __future__ import annotations

import math
from collections import deque

import numpy as np


# ---------------------------------------------------------------- grasp statics

def typed_symmetric_matrix(a, kn, kt, kc):
    """Grasp matrix for equal contact angles, entered entry by entry."""
    s, c = math.sin(a), math.cos(a)
    h = math.sqrt(3) / 2
    return np.array([
        [s, c, 0, -s / 2, -c / 2, -h, -s / 2, -c / 2, h],
        [0, 0, 1, h * s, h * c, -0.5, -h * s, -h * c, -0.5],
        [c, -s, 0, c, -s, 0, c, -s, 0],
        [0, 0, 0, h * s * c, -h * s * s, 0, -h * s * c, h * s * s, 0],
        [-s * c, s * s, 0, s * c / 2, -s * s / 2, 0, s * c / 2, -s * s / 2, 0],
        [0, 0, 1, 0, 0, 1, 0, 0, 1],
        [s / kn, c / kt, 0, s / kn, c / kt, 0, s / kn, c / kt, 0],
        [s / kn, c / kt, 0, 0, 0, 1 / (math.sqrt(3) * kc), 0, 0, -1 / (math.sqrt(3) * kc)],
        [s / (2 * kn), c / (2 * kt), math.sqrt(3) / (2 * kc), 0, 0, 0, s / kn, c / kt, 0],
    ])


def equilibrium_residual(alphas, radius, wrist_offset, beta, phi, pull, forces):
    """Net force (N) and net moment / radius (N) on the hand from three contact forces and
    the pull at the wrist, summed as 3D vectors finger by finger."""
    alphas = list(alphas)
    arm = 1.0 - sum(math.cos(a) for a in alphas) / 3 + wrist_offset / radius
    wrist = np.array([0.0, 0.0, radius * arm])
    p = pull * np.array([math.sin(beta) * math.cos(phi), math.sin(beta) * math.sin(phi), math.cos(beta)])
    f_tot = p.copy()
    m_tot = np.cross(wrist, p)
    mean_s = sum(math.sin(a) for a in alphas) / 3
    for j in range(3):
        th = 2 * math.pi * j / 3
        a = alphas[j]
        sa, ca = math.sin(a), math.cos(a)
        n = np.array([sa * math.cos(th), sa * math.sin(th), ca])
        t = np.array([ca * math.cos(th), ca * math.sin(th), -sa])
        cdir = np.array([-math.sin(th), math.cos(th), 0.0])
        Fn, Ft, Fc = forces[3 * j:3 * j + 3]
        f = Fn * n + Ft * t + Fc * cdir
        point = radius * sa * np.array([math.cos(th), math.sin(th), 0.0])
        f_tot += f
        m_tot += np.cross(point, f)
    m = m_tot / radius
    # the z moment is balanced about the mean contact lever arm
    m[2] /= mean_s if mean_s > 0 else 1.0
    return f_tot, m


# ---------------------------------------------------------------- spine cascade

def scalar_max_pull(scn, unit, psi, step=0.25, resolution=0.01, cap=300.0):
    """Force ramp with plain loops over spines; returns (force, capped).

    `unit` holds per-finger (F_n, F_t, F_c) for a 1 N pull."""
    counts = scn.spine_counts
    fingers = []
    k0 = 0
    for j, n in enumerate(counts):
        fingers.append(list(range(k0, k0 + n)))
        k0 += n
    alive = [True] * sum(counts)

    def spine_ok(F, j, i):
        fn, ft, fc = (F * u for u in unit[j])
        a = scn.alpha[j]
        p = psi[i]
        den = ft * math.sin(p) + fn * math.cos(p) + scn.f_int * math.sin(a + p)
        tan = ft * math.cos(p) - fn * math.sin(p) + scn.f_int * math.cos(a + p)
        return den > 0 and math.hypot(tan, fc) <= scn.mu * den

    def attempt(F, state):
        new = list(state)
        for j, ids in enumerate(fingers):
            for i in ids:
                if new[i] and not spine_ok(F, j, i):
                    new[i] = False
        for j, ids in enumerate(fingers):
            k = sum(new[i] for i in ids)
            if k == 0:
                return False, new
            if F * math.hypot(unit[j][1], unit[j][2]) > k * scn.f_max:
                return False, new
            if F * unit[j][0] + scn.f_int * math.sin(scn.alpha[j]) <= 0:
                return False, new
        return True, new

    n_steps = int(math.ceil(cap / step - 1e-9))
    for s in range(1, n_steps + 1):
        F = s * step
        ok, new = attempt(F, alive)
        if not ok:
            lo, hi = F - step, F
            state = alive
            while hi - lo > resolution:
                mid = 0.5 * (lo + hi)
                ok, trial = attempt(mid, state)
                if ok:
                    lo, state = mid, trial
                else:
                    hi = mid
            return hi, False
        alive = new
    return cap, True


# ---------------------------------------------------------------- geometry

def segment_hits_triangle(p0, p1, tri, eps=1e-12):
    """Plane intersection followed by same-side tests (not Moller-Trumbore)."""
    a, b, c = (np.asarray(v, float) for v in tri)
    n = np.cross(b - a, c - a)
    d = np.asarray(p1, float) - np.asarray(p0, float)
    den = n @ d
    if abs(den) < eps * np.linalg.norm(n) * max(np.linalg.norm(d), 1e-300):
        return False
    t = n @ (a - p0) / den
    if t < 0 or t > 1:
        return False
    x = p0 + t * d
    for u, v in ((a, b), (b, c), (c, a)):
        if np.cross(v - u, x - u) @ n < -1e-12 * (n @ n):
            return False
    return True


def sphere_through(points):
    """Circumsphere of four points by solving the perpendicular-bisector system."""
    p = np.asarray(points, float)
    A = 2 * (p[1:] - p[0])
    b = np.sum(p[1:] ** 2 - p[0] ** 2, axis=1)
    c = np.linalg.solve(A, b)
    return c, float(np.linalg.norm(p[0] - c))


# ---------------------------------------------------------------- search

def bfs_goal_depth(graph, start, max_depth=50):
    """Exhaustive breadth-first search over the certified stance graph; returns the
    minimum number of transitions to a goal stance, or None."""
    seen = {start.key()}
    frontier = deque([(start, 0)])
    while frontier:
        s, depth = frontier.popleft()
        if graph.is_goal(s):
            return depth
        if depth >= max_depth:
            continue
        for t, _ in graph.neighbors(s):
            if t.key() not in seen:
                seen.add(t.key())
                frontier.append((t, depth + 1))
    return None


# ---------------------------------------------------------------- dynamics

def fine_rollout(step_fn, S, tau, dt, n_sub):
    """Repeat the integrator with n_sub sub-steps of dt / n_sub."""
    for _ in range(n_sub):
        S = step_fn(S, tau, dt / n_sub)
    return S


def _axis_rotation(axis, angle):
    from scipy.spatial.transform import Rotation
    return Rotation.from_rotvec(np.eye(3)[axis] * angle).as_matrix()


def brute_force_reach(states, mesh, position, rotation, proximal, distal, spine_length, window):
    """Good faces by looping over every state and every face with the plane/same-side crossing test.

    A state survives when neither phalange crosses a face; its spine then marks every face it
    crosses whose inward normal is within `window` degrees of the spine direction."""
    down = np.array([0.0, 0.0, -1.0])
    tris = mesh.corners
    good = np.zeros(len(mesh), bool)
    lo, hi = np.radians(window[0]) - 1e-9, np.radians(window[1]) + 1e-9
    for s in states:
        r1 = _axis_rotation(1, s.base)
        r2 = r1 @ _axis_rotation(1, s.flex) @ _axis_rotation(0, s.abduction) @ _axis_rotation(2, s.twist)
        joint = position + rotation @ r1 @ down * proximal
        tip = joint + rotation @ r2 @ down * distal
        if any(segment_hits_triangle(a, b, t) for t in tris for a, b in ((position, joint), (joint, tip))):
            continue
        rs = rotation @ r2 @ _axis_rotation(1, s.spine_rotation)
        d = rs @ down
        start = tip + s.tangential * rs[:, 0]
        end = start + (spine_length + s.normal) * d
        for f, t in enumerate(tris):
            if good[f]:
                continue
            ang = np.arccos(np.clip(-(mesh.normals[f] @ d), -1, 1))
            if lo <= ang <= hi and segment_hits_triangle(start, end, t):
                good[f] = True
    return np.flatnonzero(good)


def hemisphere_cloud(radius=0.15, n=6000):
    """Fibonacci points on the upper half of a sphere at the origin."""
    k = np.arange(n) + 0.5
    z = 1 - k / n  # uniform in z over (0, 1)
    az = math.pi * (3 - math.sqrt(5)) * k
    s = np.sqrt(1 - z * z)
    return radius * np.column_stack([s * np.cos(az), s * np.sin(az), z])
