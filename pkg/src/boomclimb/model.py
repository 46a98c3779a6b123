"""Robot model: eight booms on a cylindrical body, boom kinematics, the control-to-wrench
grasp map, collision tests and static pose feasibility.

Boom joint convention (per shoulder mount, mount frame columns = [boresight, y, z]):
tilt is the polar angle away from the boresight, pan is the azimuth about it measured
from the mount y axis, so the boom direction in the mount frame is
``[cos(tilt), sin(tilt) cos(pan), sin(tilt) sin(pan)]``. With tilt in [0, 90 deg] each
boom covers the half-space on the outward side of its mount.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .geometry import IDENTITY_QUAT, frame_from_boresight, point_segment_distance, quat_to_matrix, segment_segment_distance
from .mesh import TriMesh, segment_triangle_distance

N_BOOMS = 8


class KinematicsError(Exception):
    pass


class Unreachable(KinematicsError):
    pass


class LimitViolation(KinematicsError):
    pass


class DegenerateBoom(KinematicsError):
    pass


@dataclass(frozen=True, eq=False)
class ShoulderMount:
    position_body: np.ndarray
    frame_body: np.ndarray  # column 0 is the boresight (pan = tilt = 0)

    @property
    def boresight(self) -> np.ndarray:
        return self.frame_body[:, 0]


@dataclass(frozen=True)
class JointLimits:
    pan_range: tuple = (-np.pi, np.pi)
    tilt_range: tuple = (0.0, np.pi / 2)
    extension_range: tuple = (0.2, 10.0)


@dataclass(frozen=True)
class ActuationLimits:
    prismatic_force_range: tuple = (0.0, 40.0)
    moment_range: tuple = (-10.0, 10.0)


def default_shoulders(body_length: float = 0.8, body_diameter: float = 0.4) -> tuple:
    """Three mounts per side at x in {-0.3, 0, 0.3}, two on top at x = +-0.2.

    Booms 0-2 are on the +y side, 3-5 on the -y side, 6-7 on top."""
    rad = body_diameter / 2
    ex = np.array([1.0, 0.0, 0.0])
    mounts = []
    for side in (1.0, -1.0):
        for x in (-0.3, 0.0, 0.3):
            bore = np.array([0.0, side, 0.0])
            mounts.append(ShoulderMount(np.array([x, side * rad, 0.0]), frame_from_boresight(bore, ex)))
    for x in (-0.2, 0.2):
        mounts.append(ShoulderMount(np.array([x, 0.0, rad]), frame_from_boresight(np.array([0.0, 0.0, 1.0]), ex)))
    return tuple(mounts)


def cylinder_inertia(mass: float, length: float, diameter: float) -> np.ndarray:
    r = diameter / 2
    ixx = 0.5 * mass * r * r
    iyy = mass * (3 * r * r + length * length) / 12.0
    return np.diag([ixx, iyy, iyy])


@dataclass(frozen=True, eq=False)
class RobotModel:
    body_length: float = 0.8
    body_diameter: float = 0.4
    mass_body: float = 10.0
    mass_gripper: float = 1.0
    gravity: float = 3.721
    inertia_body: Optional[np.ndarray] = None
    shoulders: tuple = field(default_factory=default_shoulders)
    joint_limits: JointLimits = field(default_factory=JointLimits)
    actuation_limits: ActuationLimits = field(default_factory=ActuationLimits)
    min_tension: float = 1.0
    collision_margin: float = 0.02
    tip_allowance: float = 0.15  # boom length next to the gripper ignored by collision tests

    def __post_init__(self):
        if self.inertia_body is None:
            object.__setattr__(self, "inertia_body", cylinder_inertia(self.mass_body, self.body_length, self.body_diameter))
        inertia = np.asarray(self.inertia_body, dtype=float)
        object.__setattr__(self, "inertia_body", inertia)
        if len(self.shoulders) != N_BOOMS:
            raise ValueError(f"expected {N_BOOMS} shoulders, got {len(self.shoulders)}")
        if self.mass_body <= 0 or self.mass_gripper < 0:
            raise ValueError("masses must be positive")
        if not np.allclose(inertia, inertia.T) or np.linalg.eigvalsh(inertia).min() <= 0:
            raise ValueError("inertia must be symmetric positive definite")

    @property
    def shoulder_positions(self) -> np.ndarray:
        return np.array([s.position_body for s in self.shoulders])

    @property
    def shoulder_frames(self) -> np.ndarray:
        return np.array([s.frame_body for s in self.shoulders])

    def with_(self, **changes) -> "RobotModel":
        from dataclasses import replace
        return replace(self, **changes)


class BodyPose(NamedTuple):
    position: np.ndarray
    orientation: np.ndarray = IDENTITY_QUAT

    @classmethod
    def at(cls, x: float, y: float = 0.0, z: float = 0.0, quat=IDENTITY_QUAT) -> "BodyPose":
        q = np.asarray(quat, dtype=float)
        return cls(np.array([x, y, z], dtype=float), q / np.linalg.norm(q))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)


class BoomJoint(NamedTuple):
    pan: float
    tilt: float
    extension: float


@dataclass(eq=False)
class JointState:
    pan: np.ndarray
    tilt: np.ndarray
    extension: np.ndarray

    @classmethod
    def zeros(cls, extension=1.0) -> "JointState":
        return cls(np.zeros(N_BOOMS), np.zeros(N_BOOMS), np.full(N_BOOMS, float(extension)))

    def __getitem__(self, i) -> BoomJoint:
        return BoomJoint(float(self.pan[i]), float(self.tilt[i]), float(self.extension[i]))


def boom_direction_local(pan, tilt) -> np.ndarray:
    pan = np.asarray(pan, dtype=float)
    tilt = np.asarray(tilt, dtype=float)
    st = np.sin(tilt)
    return np.stack([np.cos(tilt), st * np.cos(pan), st * np.sin(pan)], axis=-1)


def forward_kinematics(model: RobotModel, pose: BodyPose, joints: JointState) -> np.ndarray:
    """World positions (8, 3) of the grippers."""
    R = pose.rotation
    dirs = np.einsum("nij,nj->ni", model.shoulder_frames, boom_direction_local(joints.pan, joints.tilt))
    tips_body = model.shoulder_positions + joints.extension[:, None] * dirs
    return pose.position + tips_body @ R.T


def shoulder_world(model: RobotModel, pose: BodyPose) -> np.ndarray:
    return pose.position + model.shoulder_positions @ pose.rotation.T


def _joint_coordinates(model: RobotModel, pose: BodyPose, points: np.ndarray, indices: np.ndarray):
    """Unchecked inverse kinematics for booms `indices` aimed at `points` (n, 3)."""
    R = pose.rotation
    rel_body = (points - pose.position) @ R  # R^T (p - X)
    frames = model.shoulder_frames[indices]
    v = rel_body - model.shoulder_positions[indices]
    local = np.einsum("nji,nj->ni", frames, v)  # frame^T v
    ext = np.linalg.norm(local, axis=1)
    safe = np.where(ext > 0, ext, 1.0)
    tilt = np.arccos(np.clip(local[:, 0] / safe, -1.0, 1.0))
    pan = np.arctan2(local[:, 2], local[:, 1])
    return pan, tilt, ext


def inverse_joint_solve(model: RobotModel, pose: BodyPose, anchor, boom_index: int) -> BoomJoint:
    """Joint values that place gripper `boom_index` at `anchor`.

    Raises Unreachable when the distance is outside the extension range and
    LimitViolation when pan or tilt leave their ranges."""
    pan, tilt, ext = _joint_coordinates(model, pose, np.asarray(anchor, dtype=float)[None], np.array([boom_index]))
    joint = BoomJoint(float(pan[0]), float(tilt[0]), float(ext[0]))
    lim = model.joint_limits
    tol = 1e-12
    if not lim.extension_range[0] - tol <= joint.extension <= lim.extension_range[1] + tol:
        raise Unreachable(f"boom {boom_index}: extension {joint.extension:.4f} m outside {lim.extension_range}")
    if not lim.tilt_range[0] - tol <= joint.tilt <= lim.tilt_range[1] + tol:
        raise LimitViolation(f"boom {boom_index}: tilt {np.degrees(joint.tilt):.2f} deg outside limits")
    if not lim.pan_range[0] - tol <= joint.pan <= lim.pan_range[1] + tol:
        raise LimitViolation(f"boom {boom_index}: pan {np.degrees(joint.pan):.2f} deg outside limits")
    return joint


def joints_for_points(model: RobotModel, pose: BodyPose, points: np.ndarray, indices: Sequence[int]):
    """Vectorized unchecked inverse kinematics; returns (pan, tilt, extension) arrays."""
    return _joint_coordinates(model, pose, np.asarray(points, dtype=float), np.asarray(indices))


def joint_violations(model: RobotModel, pan, tilt, ext, tol: float = 1e-12) -> np.ndarray:
    lim = model.joint_limits
    return ((ext < lim.extension_range[0] - tol) | (ext > lim.extension_range[1] + tol)
            | (tilt < lim.tilt_range[0] - tol) | (tilt > lim.tilt_range[1] + tol)
            | (pan < lim.pan_range[0] - tol) | (pan > lim.pan_range[1] + tol))


def _boom_frames(model, pose, indices, pan, tilt):
    """World unit vectors along the boom and along increasing pan and tilt."""
    R = pose.rotation
    frames = np.einsum("ij,njk->nik", R, model.shoulder_frames[indices])
    sp, cp, st, ct = np.sin(pan), np.cos(pan), np.sin(tilt), np.cos(tilt)
    u_loc = np.stack([ct, st * cp, st * sp], -1)
    e_tilt_loc = np.stack([-st, ct * cp, ct * sp], -1)
    e_pan_loc = np.stack([np.zeros_like(pan), -sp, cp], -1)
    u = np.einsum("nij,nj->ni", frames, u_loc)
    e_pan = np.einsum("nij,nj->ni", frames, e_pan_loc)
    e_tilt = np.einsum("nij,nj->ni", frames, e_tilt_loc)
    return u, e_pan, e_tilt


def grasp_map_points(model: RobotModel, pose: BodyPose, points: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    """Grasp map for booms `indices` whose grippers sit at `points`.

    Column order per boom: prismatic force, pan moment, tilt moment."""
    indices = np.asarray(indices, dtype=int)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(indices) == 0:
        return np.zeros((6, 0))
    pan, tilt, ext = _joint_coordinates(model, pose, points, indices)
    bmin = model.joint_limits.extension_range[0]
    if np.any(ext < bmin - 1e-12):
        bad = indices[ext < bmin - 1e-12]
        raise DegenerateBoom(f"booms {bad.tolist()} shorter than b_min = {bmin} m")
    u, e_pan, e_tilt = _boom_frames(model, pose, indices, pan, tilt)
    r_sh = shoulder_world(model, pose)[indices] - pose.position
    r_tip = points - pose.position
    G = np.zeros((6, 3 * len(indices)))
    inv_b = (1.0 / ext)[:, None]
    G[:3, 0::3] = u.T
    G[3:, 0::3] = np.cross(r_sh, u).T
    # a positive shoulder moment drives the tip along e; the anchor reacts with -M/b e
    G[:3, 1::3] = (-inv_b * e_pan).T
    G[3:, 1::3] = np.cross(r_tip, -inv_b * e_pan).T
    G[:3, 2::3] = (-inv_b * e_tilt).T
    G[3:, 2::3] = np.cross(r_tip, -inv_b * e_tilt).T
    return G


def grasp_map(model: RobotModel, pose: BodyPose, joints: JointState, attached: Sequence[bool]) -> np.ndarray:
    """6 x 3n map from attached-boom controls to the body wrench about the COM."""
    attached = np.asarray(attached, dtype=bool)
    idx = np.flatnonzero(attached)
    tips = forward_kinematics(model, pose, joints)[idx]
    bmin = model.joint_limits.extension_range[0]
    if np.any(joints.extension[idx] < bmin - 1e-12):
        raise DegenerateBoom(f"attached boom shorter than b_min = {bmin} m")
    return grasp_map_points(model, pose, tips, idx)


# ------------------------------------------------------------------ environment

@dataclass(frozen=True, eq=False)
class Anchor:
    id: str
    position: np.ndarray
    limit_surface: Optional[str] = None


@dataclass(frozen=True, eq=False)
class Protrusion:
    center: np.ndarray
    radius: float


@dataclass(frozen=True, eq=False)
class Tunnel:
    """Straight circular tunnel; free space is the cylinder interior minus protrusions."""
    radius: float
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    protrusions: tuple = ()

    def axial_distance(self, p: np.ndarray) -> np.ndarray:
        rel = np.asarray(p, dtype=float) - self.origin
        along = rel @ self.axis
        return np.linalg.norm(rel - along[..., None] * self.axis, axis=-1)

    def wall_point(self, s: float, angle: float) -> np.ndarray:
        """Point on the wall at arc position `angle` (0 = +y, pi/2 = +z for an x-axis tunnel)."""
        a = self.axis / np.linalg.norm(self.axis)
        e1 = np.cross(np.array([0.0, 0.0, 1.0]), a)
        if np.linalg.norm(e1) < 1e-9:
            e1 = np.array([0.0, 1.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(a, e1)
        return self.origin + s * a + self.radius * (np.cos(angle) * e1 + np.sin(angle) * e2)


@dataclass(eq=False)
class Environment:
    anchors: dict  # id -> Anchor, insertion ordered
    geometry: object = None  # Tunnel | TriMesh | None

    def __post_init__(self):
        if not isinstance(self.anchors, dict):
            items = list(self.anchors)
            ids = [a.id for a in items]
            if len(set(ids)) != len(ids):
                raise ValueError("anchor ids must be unique")
            self.anchors = {a.id: a for a in items}

    def position(self, anchor_id: str) -> np.ndarray:
        return self.anchors[anchor_id].position

    def positions(self, ids: Sequence) -> np.ndarray:
        return np.array([self.anchors[i].position for i in ids], dtype=float).reshape(-1, 3)

    def rotated_about_z(self, angle: float) -> "Environment":
        """Copy rotated about the world z axis (gravity axis) through the origin."""
        c, s = np.cos(angle), np.sin(angle)
        Rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        anchors = {k: Anchor(a.id, Rz @ a.position, a.limit_surface) for k, a in self.anchors.items()}
        geo = self.geometry
        if isinstance(geo, Tunnel):
            geo = Tunnel(geo.radius, Rz @ geo.origin, Rz @ geo.axis,
                         tuple(Protrusion(Rz @ p.center, p.radius) for p in geo.protrusions))
        elif isinstance(geo, TriMesh):
            geo = geo.transformed(Rz)
        return Environment(anchors, geo)


def body_capsule(model: RobotModel, pose: BodyPose):
    """Axis endpoints and radius of the body capsule."""
    rad = model.body_diameter / 2
    half = max(model.body_length / 2 - rad, 0.0)
    ax = pose.rotation[:, 0]
    return pose.position - half * ax, pose.position + half * ax, rad


def boom_segments(model: RobotModel, pose: BodyPose, tips: np.ndarray, indices: Sequence[int]):
    """Collision-relevant boom segments: shoulder to tip minus the gripper allowance."""
    indices = np.asarray(indices, dtype=int)
    starts = shoulder_world(model, pose)[indices]
    vec = tips - starts
    length = np.linalg.norm(vec, axis=1)
    keep = np.maximum(length - model.tip_allowance, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(length[:, None] > 0, vec / np.where(length > 0, length, 1.0)[:, None], 0.0)
    return starts, starts + keep[:, None] * unit


def collision_check(model: RobotModel, pose: BodyPose, joints: Optional[JointState], env: Environment,
                    booms: Optional[Sequence[int]] = None, tips: Optional[np.ndarray] = None) -> bool:
    """True when the body capsule or a boom segment touches the environment, or booms touch
    each other. Contact exactly at the clearance boundary counts as collision."""
    if booms is None:
        booms = np.arange(N_BOOMS)
    booms = np.asarray(booms, dtype=int)
    if tips is None:
        tips = forward_kinematics(model, pose, joints)[booms]
    a, b, rad = body_capsule(model, pose)
    margin = model.collision_margin
    seg_a, seg_b = boom_segments(model, pose, tips, booms)
    geo = env.geometry
    if isinstance(geo, Tunnel):
        if np.any(geo.axial_distance(np.array([a, b])) + rad >= geo.radius):
            return True
        for pr in geo.protrusions:
            if point_segment_distance(pr.center, a, b) <= rad + pr.radius:
                return True
            for sa, sb in zip(seg_a, seg_b):
                if point_segment_distance(pr.center, sa, sb) <= pr.radius + margin:
                    return True
        if len(seg_a) and np.any(geo.axial_distance(np.vstack([seg_a, seg_b])) >= geo.radius - margin):
            return True
    elif isinstance(geo, TriMesh) and len(geo):
        tris = geo.corners
        if segment_triangle_distance(a[None], b[None], tris).min() <= rad:
            return True
        if len(seg_a) and segment_triangle_distance(seg_a, seg_b, tris).min() <= margin:
            return True
    # boom-boom and boom-body contact
    for i in range(len(booms)):
        u = seg_b[i] - seg_a[i]
        n = np.linalg.norm(u)
        if n > 0.01 and segment_segment_distance(seg_a[i] + 0.01 * u / n, seg_b[i], a, b) <= rad - 1e-9:
            return True
        for j in range(i + 1, len(booms)):
            if segment_segment_distance(seg_a[i], seg_b[i], seg_a[j], seg_b[j]) <= margin:
                return True
    return False
