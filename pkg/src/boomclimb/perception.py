"""Grasp-site perception: far-range sphere search and near-range alpha maps."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from .grasp import alpha_from_ratio
from .limit_surface import LimitSurface, query


class ParseError(ValueError):
    pass


class EmptyCloud(ValueError):
    pass


class Degenerate(ValueError):
    pass


class DegenerateNeighborhood(ValueError):
    pass


@dataclass(eq=False)
class PointCloud:
    points: np.ndarray  # (N, 3) m, sensor frame
    colors: Optional[np.ndarray] = None  # (N, 3) uint8

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point cloud has non-finite coordinates")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)

    def __len__(self):
        return len(self.points)

    def subset(self, idx) -> "PointCloud":
        return PointCloud(self.points[idx], None if self.colors is None else self.colors[idx])


# ------------------------------------------------------------------------ I/O

def _cloud_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        return fmt
    return "ascii-ply" if path.suffix.lower() == ".ply" else "xyz-csv"


def load_point_cloud(path, fmt: Optional[str] = None) -> PointCloud:
    path = Path(path)
    fmt = _cloud_format(path, fmt)
    lines = path.read_text().splitlines()
    if fmt == "ascii-ply":
        pc = _parse_ply(lines)
    elif fmt == "xyz-csv":
        pc = _parse_csv(lines)
    else:
        raise ParseError(f"unknown point cloud format {fmt!r}")
    if len(pc) == 0:
        raise EmptyCloud(f"{path}: no points")
    return pc


def _parse_csv(lines) -> PointCloud:
    rows = []
    for no, line in enumerate(lines, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p for p in text.replace(",", " ").split()]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            if not rows and no == 1:
                continue  # header row
            raise ParseError(f"line {no}: not numeric: {text!r}") from None
        if len(vals) not in (3, 6):
            raise ParseError(f"line {no}: expected 3 or 6 values, got {len(vals)}")
        rows.append(vals)
    if not rows:
        return PointCloud(np.zeros((0, 3)))
    if len({len(r) for r in rows}) != 1:
        raise ParseError("mixed row widths")
    arr = np.array(rows)
    colors = arr[:, 3:6] if arr.shape[1] == 6 else None
    return PointCloud(arr[:, :3], colors)


def _parse_ply(lines) -> PointCloud:
    if not lines or lines[0].strip() != "ply":
        raise ParseError("line 1: missing 'ply' magic")
    n_vertex, props, end = None, [], None
    in_vertex = False
    for no, line in enumerate(lines[1:], 2):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            if tok[1:2] != ["ascii"]:
                raise ParseError(f"line {no}: only ascii ply is supported")
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n_vertex = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            props.append(tok[-1])
        elif tok[0] == "end_header":
            end = no
            break
    if end is None or n_vertex is None:
        raise ParseError("incomplete ply header")
    try:
        ix = [props.index(c) for c in "xyz"]
    except ValueError:
        raise ParseError("ply vertex element lacks x/y/z") from None
    ic = [props.index(c) for c in ("red", "green", "blue")] if all(c in props for c in ("red", "green", "blue")) else None
    body = lines[end:end + n_vertex]
    if len(body) < n_vertex:
        raise ParseError(f"line {end + len(body) + 1}: header declares {n_vertex} vertices, found {len(body)}")
    pts, cols = np.empty((n_vertex, 3)), (np.empty((n_vertex, 3)) if ic else None)
    for k, line in enumerate(body):
        tok = line.split()
        if len(tok) < len(props):
            raise ParseError(f"line {end + k + 1}: expected {len(props)} values")
        try:
            pts[k] = [float(tok[i]) for i in ix]
            if ic:
                cols[k] = [float(tok[i]) for i in ic]
        except ValueError:
            raise ParseError(f"line {end + k + 1}: not numeric") from None
    return PointCloud(pts, cols)


def save_point_cloud(pc: PointCloud, path, fmt: Optional[str] = None) -> None:
    path = Path(path)
    fmt = _cloud_format(path, fmt)
    rows = [" ".join(repr(float(v)) for v in p) for p in pc.points]
    if pc.colors is not None:
        rows = [r + " " + " ".join(str(int(c)) for c in col) for r, col in zip(rows, pc.colors)]
    if fmt == "ascii-ply":
        head = ["ply", "format ascii 1.0", f"element vertex {len(pc)}",
                "property double x", "property double y", "property double z"]
        if pc.colors is not None:
            head += ["property uchar red", "property uchar green", "property uchar blue"]
        head.append("end_header")
        text = "\n".join(head + rows)
    else:
        text = "\n".join(r.replace(" ", ",") for r in rows)
    path.write_text(text + "\n")


# --------------------------------------------------------------- downsampling

def voxel_downsample(pc: PointCloud, voxel: float) -> PointCloud:
    """Mean of the points in each occupied voxel of a grid anchored at the origin, sorted by voxel index."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    if len(pc) == 0:
        return pc
    keys = np.floor(pc.points / voxel).astype(np.int64)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inv, pc.points)
    colors = None
    if pc.colors is not None:
        csum = np.zeros((len(counts), 3))
        np.add.at(csum, inv, pc.colors.astype(float))
        colors = np.round(csum / counts[:, None])
    return PointCloud(sums / counts[:, None], colors)


# ------------------------------------------------------------------ spheres

@dataclass(frozen=True)
class SphereCandidate:
    center: tuple
    radius: float
    inliers: int
    inlier_fraction: float


@dataclass(frozen=True)
class MsacConfig:
    d_max: float = 0.005  # m
    iterations: int = 2000
    r_min: float = 0.075
    r_max: float = 0.2
    min_inliers: int = 30
    min_fraction: float = 0.05  # of the input cloud
    max_models: int = 5
    seed: int = 0


def sphere_from_points(P: np.ndarray):
    """Exact spheres through batches of four points, P (..., 4, 3) -> centers, radii, ok mask."""
    P = np.asarray(P, dtype=float)
    M = np.concatenate([P, np.ones(P.shape[:-1] + (1,))], axis=-1)
    rhs = -np.sum(P * P, axis=-1)
    det = np.linalg.det(M)
    scale = np.max(np.abs(P - P[..., :1, :]), axis=(-2, -1)) ** 3 + 1e-300
    ok = np.abs(det) > 1e-9 * scale
    Ms = np.where(ok[..., None, None], M, np.eye(4))
    sol = np.linalg.solve(Ms, rhs[..., None])[..., 0]
    center = -0.5 * sol[..., :3]
    r2 = np.sum(center * center, axis=-1) - sol[..., 3]
    ok &= r2 > 0
    return center, np.sqrt(np.where(ok, r2, 0.0)), ok


def _refine(points, center, radius):
    res = least_squares(lambda q: np.linalg.norm(points - q[:3], axis=1) - q[3],
                        np.concatenate([center, [radius]]), method="lm")
    return res.x[:3], abs(res.x[3])


def msac_sphere_fit(pc: PointCloud, cfg: MsacConfig = MsacConfig()) -> list:
    """Sequential MSAC sphere search; models outside [r_min, r_max] are discarded."""
    pts = pc.points
    if len(pts) < 4:
        raise Degenerate("need at least four points")
    rng = np.random.default_rng(cfg.seed)
    remaining = np.arange(len(pts))
    need = max(cfg.min_inliers, int(np.ceil(cfg.min_fraction * len(pts))))
    out = []
    d2max = cfg.d_max ** 2
    any_model = False
    for _ in range(cfg.max_models):
        if remaining.size < max(4, need):
            break
        P = pts[remaining]
        sq = np.sum(P * P, axis=1)
        best = (np.inf, None, None)
        for start in range(0, cfg.iterations, 250):
            m = min(250, cfg.iterations - start)
            idx = rng.integers(0, len(P), size=(m, 4))
            c, r, ok = sphere_from_points(P[idx])
            srt = np.sort(idx, axis=1)
            ok &= np.all(srt[:, 1:] != srt[:, :-1], axis=1)
            if not ok.any():
                continue
            c, r = c[ok], r[ok]
            # |p - c|^2 = |p|^2 - 2 p.c + |c|^2
            dist2 = np.maximum(sq[None, :] - 2.0 * (c @ P.T) + np.sum(c * c, axis=1)[:, None], 0.0)
            d = np.sqrt(dist2) - r[:, None]
            score = np.minimum(d * d, d2max).sum(axis=1)
            k = int(np.argmin(score))
            if score[k] < best[0]:
                best = (score[k], c[k], r[k])
        if best[1] is None:
            if not any_model:
                raise Degenerate("every sampled quadruple was coplanar")
            break
        any_model = True
        _, c, r = best
        inl = np.abs(np.linalg.norm(P - c, axis=1) - r) <= cfg.d_max
        if inl.sum() < need:
            break
        c, r = _refine(P[inl], c, r)
        inl = np.abs(np.linalg.norm(P - c, axis=1) - r) <= cfg.d_max
        if cfg.r_min <= r <= cfg.r_max:
            out.append(SphereCandidate(tuple(float(v) for v in c), float(r), int(inl.sum()),
                                       float(inl.sum()) / len(pts)))
        remaining = remaining[~inl]
    return out


def find_sphere_candidates(pc: PointCloud, voxel: float = 0.005, cfg: MsacConfig = MsacConfig()) -> list:
    return msac_sphere_fit(voxel_downsample(pc, voxel), cfg)


def synthetic_sphere_cloud(radius: float, center=(0.0, 0.0, 1.0), n_points: int = 2000, noise: float = 0.0,
                           outlier_fraction: float = 0.0, cap_angle: float = np.radians(80), rng=None) -> PointCloud:
    """Visible cap of a sphere (facing the sensor at the origin) plus uniform outliers.

    `outlier_fraction` is the share of outliers in the returned cloud."""
    rng = np.random.default_rng(rng)
    center = np.asarray(center, dtype=float)
    view = -center / np.linalg.norm(center)
    n_out = int(round(outlier_fraction * n_points))
    n_in = n_points - n_out
    # uniform on the cap around `view`
    z = rng.uniform(np.cos(cap_angle), 1.0, n_in)
    az = rng.uniform(0, 2 * np.pi, n_in)
    s = np.sqrt(1 - z * z)
    helper = np.array([1.0, 0, 0]) if abs(view[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(view, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(view, e1)
    dirs = z[:, None] * view + (s * np.cos(az))[:, None] * e1 + (s * np.sin(az))[:, None] * e2
    pts = center + radius * dirs + noise * rng.standard_normal((n_in, 3))
    lo, hi = center - 1.5 * radius, center + 1.5 * radius
    outl = rng.uniform(lo, hi, (n_out, 3))
    allp = np.vstack([pts, outl])
    return PointCloud(allp[rng.permutation(len(allp))])


# ------------------------------------------------------------------- normals

def estimate_normals(pc: PointCloud, knn_count: int = 30, viewpoint=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Unit normals from the covariance of each point's k nearest neighbours (itself included),
    oriented toward `viewpoint` (the sensor origin by default)."""
    n = len(pc)
    if knn_count < 3:
        raise ValueError("knn_count must be at least 3")
    if n < knn_count:
        raise ValueError(f"cloud has {n} points, fewer than knn_count = {knn_count}")
    tree = cKDTree(pc.points)
    _, nbr = tree.query(pc.points, k=knn_count)
    nb = pc.points[nbr]
    nb = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", nb, nb) / knn_count
    w, v = np.linalg.eigh(cov)
    if np.any(w[:, 1] <= 1e-12 * np.maximum(w[:, 2], 1e-300)):
        bad = int(np.flatnonzero(w[:, 1] <= 1e-12 * np.maximum(w[:, 2], 1e-300))[0])
        raise DegenerateNeighborhood(f"neighbourhood of point {bad} is collinear")
    normals = v[:, :, 0]
    flip = np.einsum("ni,ni->n", normals, np.asarray(viewpoint, dtype=float) - pc.points) < 0
    normals[flip] *= -1
    return normals


# ------------------------------------------------------------------ alpha map

@dataclass(eq=False)
class AlphaMap:
    alpha: np.ndarray  # (N,) rad
    graspable: np.ndarray  # (N,) bool
    axis: np.ndarray
    alpha_min: float
    alpha_max: float

    @property
    def graspable_fraction(self) -> float:
        return float(self.graspable.mean()) if len(self.graspable) else 0.0

    def to_csv(self, points: np.ndarray) -> str:
        lines = ["x,y,z,alpha,graspable"]
        for p, a, g in zip(points, self.alpha, self.graspable):
            lines.append(",".join(repr(float(v)) for v in (*p, a)) + f",{int(g)}")
        return "\n".join(lines) + "\n"


def alpha_map(pc: PointCloud, normals: np.ndarray, gripper_axis=(0.0, 0.0, 1.0),
              alpha_min: float = np.radians(25), alpha_max: float = np.radians(85)) -> AlphaMap:
    axis = np.asarray(gripper_axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError("gripper axis must be a unit vector")
    cosang = np.clip(np.asarray(normals) @ axis, -1.0, 1.0)
    alpha = np.arccos(cosang)
    return AlphaMap(alpha, (alpha >= alpha_min) & (alpha <= alpha_max), axis, alpha_min, alpha_max)


def finger_alphas(pc: PointCloud, amap: AlphaMap, center=None) -> Optional[tuple]:
    """Mean graspable alpha in each 120 deg sector about the gripper axis (finger 1 along +x of the
    axis frame); None when a sector has no graspable point."""
    axis = amap.axis
    helper = np.array([1.0, 0, 0]) if abs(axis[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = helper - axis * (helper @ axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    rel = pc.points - (pc.points.mean(axis=0) if center is None else np.asarray(center))
    az = np.mod(np.arctan2(rel @ e2, rel @ e1) + np.pi / 3, 2 * np.pi)
    sector = np.minimum((az // (2 * np.pi / 3)).astype(int), 2)
    out = []
    for j in range(3):
        m = amap.graspable & (sector == j)
        if not m.any():
            return None
        out.append(float(amap.alpha[m].mean()))
    return tuple(out)


# ------------------------------------------------------------------- ranking

@dataclass
class GraspSite:
    id: str
    surface: Optional[LimitSurface] = None
    alpha_map: Optional[AlphaMap] = None
    info: dict = field(default_factory=dict)

    def graspable(self) -> bool:
        return self.surface is not None and (self.alpha_map is None or bool(self.alpha_map.graspable.any()))


def rank_grasp_sites(sites: Sequence[GraspSite], direction, percentile=5.0) -> list:
    """Sites ordered by queried pull force at `direction` (highest first), ties by id.

    Returns [(site_id, score)]; sites without graspable area score 0."""
    scored = []
    for s in sites:
        score = query(s.surface, direction, percentile) if s.graspable() else 0.0
        scored.append((s.id, float(score)))
    return sorted(scored, key=lambda t: (-t[1], t[0]))


def sphere_alpha(candidate: SphereCandidate, link_length: float = 0.06) -> float:
    """Contact angle predicted for a sphere candidate from the link length to radius ratio."""
    return alpha_from_ratio(link_length / candidate.radius)
