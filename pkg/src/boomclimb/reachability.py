"""Which faces of a rock mesh can a single-spine finger grasp?

Five finger designs of increasing mobility are compared:

1. one rigid phalange on a base revolute joint, spine fixed at the tip
2. two phalanges with a revolute joint between them
3. two phalanges with a ball joint between them
4. as 3, plus spine rotation relative to the distal phalange
5. as 4, plus tangential and normal linear travel of the spine

All degrees of freedom share the same grid of values across cases and a disabled joint
sits at zero, so each case's state set is contained in the next one's. A state is kept if
neither phalange (a zero-thickness segment) crosses the mesh. A face is good when some
kept state's spine segment crosses it at an angle inside the attack window, measured
between the spine direction and the inward face normal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh, paired_segment_triangle_hits

DOWN = np.array([0.0, 0.0, -1.0])
AXES = ("base", "flex", "abduction", "twist", "spine_rotation", "tangential", "normal")
_ENABLED = {
    1: {"base"},
    2: {"base", "flex"},
    3: {"base", "flex", "abduction", "twist"},
    4: {"base", "flex", "abduction", "twist", "spine_rotation"},
    5: {"base", "flex", "abduction", "twist", "spine_rotation", "tangential", "normal"},
}


class FingerState(NamedTuple):
    base: float  # rad
    flex: float
    abduction: float
    twist: float
    spine_rotation: float
    tangential: float  # m
    normal: float  # m


@dataclass(frozen=True)
class FingerCase:
    case_id: int
    proximal: float = 0.060  # m
    distal: float = 0.053
    spine_length: float = 0.005
    base_range: tuple = (-90.0, 90.0)  # deg
    flex_range: tuple = (0.0, 120.0)
    abduction_range: tuple = (-45.0, 45.0)
    twist_range: tuple = (-30.0, 30.0)
    spine_rotation_range: tuple = (-45.0, 45.0)
    tangential_range: tuple = (-0.010, 0.010)  # m
    normal_range: tuple = (0.0, 0.010)
    angle_step: float = 5.0  # deg
    travel_step: float = 0.002  # m

    def __post_init__(self):
        if self.case_id not in _ENABLED:
            raise ValueError("case id must be 1..5")
        for name in AXES:
            lo, hi = getattr(self, f"{name}_range")
            if not lo <= 0.0 <= hi:
                raise ValueError(f"{name} range must contain zero so the cases nest")

    @property
    def enabled(self) -> set:
        return _ENABLED[self.case_id]

    def axis_values(self, name: str) -> np.ndarray:
        """Grid for one degree of freedom (rad or m); a disabled joint is fixed at zero."""
        if name not in self.enabled:
            return np.zeros(1)
        lo, hi = getattr(self, f"{name}_range")
        if name in ("tangential", "normal"):
            return _grid(lo, hi, self.travel_step)
        return np.radians(_grid(lo, hi, self.angle_step))

    def grid(self) -> dict:
        return {name: self.axis_values(name) for name in AXES}

    @property
    def n_states(self) -> int:
        return int(np.prod([len(v) for v in self.grid().values()]))

    def refined(self, factor: int = 2) -> "FingerCase":
        return replace(self, angle_step=self.angle_step / factor, travel_step=self.travel_step / factor)


def _grid(lo, hi, step):
    """Values lo..hi in `step` increments, built outward from zero so zero is exact."""
    neg = -np.arange(0, int(np.floor(-lo / step + 1e-9)) + 1)[::-1] * step
    pos = np.arange(1, int(np.floor(hi / step + 1e-9)) + 1) * step
    return np.concatenate([neg, pos])


def finger_cases(**overrides) -> list:
    return [FingerCase(k, **overrides) for k in range(1, 6)]


def sample_finger_states(case: FingerCase):
    """Iterate over the Cartesian grid of the case's joint values."""
    g = case.grid()
    for combo in itertools.product(*(g[n] for n in AXES)):
        yield FingerState(*(float(v) for v in combo))


# ---------------------------------------------------------------- kinematics

@dataclass(frozen=True, eq=False)
class BasePose:
    position: np.ndarray
    rotation: np.ndarray  # columns: finger-plane axis x, lateral y, outward normal z

    def mirrored(self, axis: int) -> "BasePose":
        """Mirror image across the plane normal to world `axis`, kept right-handed by flipping lateral y."""
        S = np.eye(3)
        S[axis, axis] = -1.0
        R = S @ self.rotation
        R[:, 1] *= -1.0
        return BasePose(S @ self.position, R)


def base_pose_for(mesh: TriMesh, target, standoff: float = 0.02, patch_radius: float = 0.03,
                  plane_hint=(1.0, 0.0, 0.0)) -> BasePose:
    """Base `standoff` above `target` along the area-weighted mean normal of faces within `patch_radius`."""
    target = np.asarray(target, dtype=float)
    near = np.linalg.norm(mesh.centroids - target, axis=1) <= patch_radius
    if not near.any():
        near = np.zeros(len(mesh), bool)
        near[np.argmin(np.linalg.norm(mesh.centroids - target, axis=1))] = True
    n = (mesh.normals[near] * mesh.areas[near, None]).sum(axis=0)
    n /= np.linalg.norm(n)
    x = np.asarray(plane_hint, dtype=float) - n * (n @ plane_hint)
    if np.linalg.norm(x) < 1e-9:
        x = np.array([0.0, 1.0, 0.0]) - n * n[1]
    x /= np.linalg.norm(x)
    return BasePose(target + standoff * n, np.column_stack([x, np.cross(n, x), n]))


def _rot(axis: int, angle):
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    R = np.zeros(angle.shape + (3, 3))
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    R[..., axis, axis] = 1.0
    R[..., i, i] = c
    R[..., j, j] = c
    R[..., i, j] = -s
    R[..., j, i] = s
    return R


def phalanges(pose: BasePose, case: FingerCase, base, flex, abduction, twist=0.0):
    """Joint, tip and distal frame in world coordinates for arrays of joint values."""
    base, flex, abduction, twist = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (base, flex, abduction, twist)))
    R1 = _rot(1, base)
    R2 = R1 @ _rot(1, flex) @ _rot(0, abduction) @ _rot(2, twist)
    Rb = pose.rotation
    joint = pose.position + (Rb @ (R1 @ DOWN)[..., None])[..., 0] * case.proximal
    tip = joint + (Rb @ (R2 @ DOWN)[..., None])[..., 0] * case.distal
    return joint, tip, Rb @ R2


def spine_segment(pose: BasePose, case: FingerCase, state: FingerState, travel: Optional[float] = None):
    """Start and end of the spine for one state; `travel` overrides the normal travel."""
    _, tip, R2 = phalanges(pose, case, state.base, state.flex, state.abduction, state.twist)
    Rs = R2 @ _rot(1, state.spine_rotation)
    d = Rs @ DOWN
    t = Rs[:, 0]
    start = tip + state.tangential * t
    nt = state.normal if travel is None else travel
    return start, start + (case.spine_length + nt) * d


# ----------------------------------------------------------------- collision

class _MeshIndex:
    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self.tris = mesh.corners
        self.empty = len(mesh) == 0
        if not self.empty:
            self.tree = cKDTree(mesh.centroids)
            self.circum = float(np.max(np.linalg.norm(self.tris - mesh.centroids[:, None, :], axis=-1)))

    def near(self, centers, radii) -> list:
        if self.empty:
            return [[] for _ in range(len(centers))]
        return self.tree.query_ball_point(centers, np.asarray(radii) + self.circum)

    def segments_cross(self, p0, p1, chunk: int = 2000) -> np.ndarray:
        """(S,) True where segment i crosses any face."""
        p0, p1 = np.atleast_2d(p0), np.atleast_2d(p1)
        out = np.zeros(len(p0), bool)
        if self.empty or len(p0) == 0:
            return out
        for lo in range(0, len(p0), chunk):
            a, b = p0[lo:lo + chunk], p1[lo:lo + chunk]
            cand = self.near(0.5 * (a + b), 0.5 * np.linalg.norm(b - a, axis=1))
            seg = np.repeat(np.arange(len(a)), [len(c) for c in cand])
            if seg.size == 0:
                continue
            face = np.concatenate([np.asarray(c, dtype=int) for c in cand])
            hit = paired_segment_triangle_hits(a[seg], b[seg], self.tris[face])
            out[lo + np.unique(seg[hit])] = True
        return out


def finger_collides(state: FingerState, mesh: TriMesh, pose: BasePose, case: FingerCase) -> bool:
    joint, tip, _ = phalanges(pose, case, state.base, state.flex, state.abduction, state.twist)
    idx = _MeshIndex(mesh)
    hits = idx.segments_cross(np.stack([pose.position, joint]), np.stack([joint, tip]))
    return bool(hits.any())


# -------------------------------------------------------------- reachability

@dataclass(eq=False)
class ReachResult:
    case_id: int
    faces: np.ndarray  # sorted good face indices
    area: float
    n_states: int


def _attack_ok(d, normals, window):
    cosang = np.clip(-(normals @ d.T), -1.0, 1.0)  # (F, m)
    ang = np.arccos(cosang)
    lo, hi = np.radians(window[0]), np.radians(window[1])
    return (ang >= lo - 1e-9) & (ang <= hi + 1e-9)


def _evaluate(case: FingerCase, mesh: TriMesh, pose: BasePose, idx: _MeshIndex, configs, window, known):
    """Good faces for `case` given precomputed phalange configs; `known` faces are skipped."""
    good = known.copy()
    if idx.empty:
        return good
    g = case.grid()
    # phalange configurations belonging to this case
    sel = np.ones(len(configs["base"]), bool)
    for name in ("base", "flex", "abduction"):
        sel &= np.isin(configs[name], g[name])
    sel &= configs["free"] & configs["near"]
    twist, spin, tang = g["twist"], g["spine_rotation"], g["tangential"]
    length = case.spine_length + float(g["normal"].max())
    normals = mesh.normals
    Rb = pose.rotation
    TS, SS = np.meshgrid(twist, spin, indexing="ij")
    TS, SS = TS.ravel(), SS.ravel()
    local = _rot(2, TS) @ _rot(1, SS)  # distal-frame rotation of the spine, (m, 3, 3)
    reach = length + float(np.max(np.abs(tang)))
    for i in np.flatnonzero(sel):
        cand = np.asarray(idx.near(configs["tip"][i][None], [reach])[0], dtype=int)
        cand = cand[~good[cand]] if cand.size else cand
        if cand.size == 0:
            continue
        Rs = Rb @ configs["R2"][i] @ local  # (m, 3, 3)
        d = Rs @ DOWN
        t = Rs[:, :, 0]
        if len(tang) == 1:
            d = np.unique(d, axis=0)
            t = np.zeros_like(d)
        ok = _attack_ok(d, normals[cand], window)  # (F, m)
        fi, mi = np.nonzero(ok)
        if fi.size == 0:
            continue
        fi = np.repeat(fi, len(tang))
        mi = np.repeat(mi, len(tang))
        s = np.tile(tang, len(fi) // len(tang))
        start = configs["tip"][i] + s[:, None] * t[mi]
        end = start + length * d[mi]
        hit = paired_segment_triangle_hits(start, end, idx.tris[cand[fi]])
        good[cand[fi[hit]]] = True
    return good


def _phalange_configs(case: FingerCase, mesh: TriMesh, pose: BasePose, idx: _MeshIndex):
    g = case.grid()
    B, F, A = np.meshgrid(g["base"], g["flex"], g["abduction"], indexing="ij")
    B, F, A = B.ravel(), F.ravel(), A.ravel()
    joint, tip, R2 = phalanges(pose, case, B, F, A)
    Rb = pose.rotation
    R2_local = Rb.T @ R2  # distal frame relative to the base
    start = np.repeat(pose.position[None], len(B), axis=0)
    free = ~(idx.segments_cross(start, joint) | idx.segments_cross(joint, tip))
    reach = case.spine_length + max(case.normal_range[1], 0.0) + max(abs(v) for v in case.tangential_range)
    if idx.empty:
        near = np.zeros(len(B), bool)
    else:
        dist, _ = idx.tree.query(tip)
        near = dist <= reach + idx.circum
    return {"base": B, "flex": F, "abduction": A, "tip": tip, "R2": R2_local, "free": free, "near": near}


def compare_cases(mesh: TriMesh, pose: BasePose, cases=None, window=(10.0, 30.0)) -> list:
    """Good faces and area for each case, in case order; later cases reuse earlier good faces."""
    cases = sorted(cases or finger_cases(), key=lambda c: c.case_id)
    idx = _MeshIndex(mesh)
    full = replace(cases[-1], case_id=5)
    configs = _phalange_configs(full, mesh, pose, idx)
    good = np.zeros(len(mesh), bool)
    out = []
    prev = None
    for case in cases:
        if prev is not None and not _nests(prev, case):
            good = np.zeros(len(mesh), bool)
        good = _evaluate(case, mesh, pose, idx, configs, window, good)
        faces = np.flatnonzero(good)
        out.append(ReachResult(case.case_id, faces, float(mesh.areas[faces].sum()) if faces.size else 0.0, case.n_states))
        prev = case
    return out


def _nests(a: FingerCase, b: FingerCase) -> bool:
    ga, gb = a.grid(), b.grid()
    return a.case_id < b.case_id and all(np.all(np.isin(ga[n], gb[n])) for n in AXES)


def reachable_faces(case: FingerCase, mesh: TriMesh, pose: BasePose, window=(10.0, 30.0)) -> ReachResult:
    idx = _MeshIndex(mesh)
    configs = _phalange_configs(replace(case, case_id=5), mesh, pose, idx)
    good = _evaluate(case, mesh, pose, idx, configs, window, np.zeros(len(mesh), bool))
    faces = np.flatnonzero(good)
    return ReachResult(case.case_id, faces, float(mesh.areas[faces].sum()) if faces.size else 0.0, case.n_states)


def cases_csv(results) -> str:
    lines = ["case,area_m2,faces"]
    lines += [f"{r.case_id},{float(r.area)!r},{len(r.faces)}" for r in results]
    return "\n".join(lines) + "\n"
