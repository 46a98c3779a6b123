"""Triangle meshes: loading, test-shape generators and vectorized segment queries."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshFormatError(ValueError):
    pass


@dataclass(eq=False)
class TriMesh:
    vertices: np.ndarray  # (V, 3)
    triangles: np.ndarray  # (F, 3) int

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise MeshFormatError("triangle index out of range")
        cross = np.cross(self.corners[:, 1] - self.corners[:, 0], self.corners[:, 2] - self.corners[:, 0])
        norm = np.linalg.norm(cross, axis=1)
        keep = norm > 0
        if not keep.all():
            # drop zero-area slivers; they carry no reachable area
            self.triangles = self.triangles[keep]
            cross, norm = cross[keep], norm[keep]
        self.areas = 0.5 * norm
        self.normals = cross / norm[:, None] if len(norm) else np.zeros((0, 3))

    @property
    def corners(self) -> np.ndarray:
        return self.vertices[self.triangles]

    @property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    def __len__(self) -> int:
        return len(self.triangles)

    def transformed(self, rotation: np.ndarray, translation=np.zeros(3)) -> "TriMesh":
        return TriMesh(self.vertices @ np.asarray(rotation).T + translation, self.triangles.copy())

    def mirrored(self, axis: int) -> "TriMesh":
        """Reflect across the plane normal to `axis`; winding is flipped to keep normals outward."""
        v = self.vertices.copy()
        v[:, axis] *= -1
        return TriMesh(v, self.triangles[:, ::-1].copy())


def empty_mesh() -> TriMesh:
    return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


def load_mesh(path) -> TriMesh:
    path = Path(path)
    suffix = path.suffix.lower()
    text = path.read_text()
    if suffix == ".stl":
        return _parse_ascii_stl(text)
    if suffix == ".obj":
        return _parse_obj(text)
    raise MeshFormatError(f"unsupported mesh format: {suffix}")


def _parse_ascii_stl(text: str) -> TriMesh:
    lines = text.splitlines()
    if not lines or not lines[0].lstrip().lower().startswith("solid"):
        raise MeshFormatError("line 1: ascii STL must start with 'solid'")
    verts = []
    for lineno, line in enumerate(lines, start=1):
        tok = line.split()
        if tok and tok[0] == "vertex":
            if len(tok) != 4:
                raise MeshFormatError(f"line {lineno}: malformed vertex")
            try:
                verts.append([float(t) for t in tok[1:]])
            except ValueError as exc:
                raise MeshFormatError(f"line {lineno}: {exc}") from None
    if len(verts) % 3:
        raise MeshFormatError("vertex count is not a multiple of 3")
    verts = np.array(verts, dtype=float).reshape(-1, 3)
    return TriMesh(verts, np.arange(len(verts)).reshape(-1, 3))


def _parse_obj(text: str) -> TriMesh:
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "v":
                verts.append([float(t) for t in tok[1:4]])
            elif tok[0] == "f":
                idx = [int(t.split("/")[0]) for t in tok[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
        except (ValueError, IndexError) as exc:
            raise MeshFormatError(f"line {lineno}: {exc}") from None
    return TriMesh(np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_ascii_stl(mesh: TriMesh, path, name: str = "mesh") -> None:
    out = [f"solid {name}"]
    for n, tri in zip(mesh.normals, mesh.corners):
        out.append("  facet normal " + " ".join(repr(float(x)) for x in n))
        out.append("    outer loop")
        for v in tri:
            out.append("      vertex " + " ".join(repr(float(x)) for x in v))
        out.append("    endloop")
        out.append("  endfacet")
    out.append(f"endsolid {name}")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------- generators

def _grid_mesh(points: np.ndarray) -> TriMesh:
    """Triangulate a (rows, cols, 3) structured grid of points."""
    rows, cols, _ = points.shape
    idx = np.arange(rows * cols).reshape(rows, cols)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    tris = np.concatenate([np.stack([a, c, b], 1), np.stack([b, c, d], 1)])
    return TriMesh(points.reshape(-1, 3), tris)


def hemisphere_mesh(radius: float, n_rings: int = 18, n_segments: int = 48, max_polar: float = np.pi / 2) -> TriMesh:
    """Spherical cap around +z, centred at the origin, outward normals."""
    polar = np.linspace(0.0, max_polar, n_rings + 1)
    azim = np.linspace(0.0, 2 * np.pi, n_segments + 1)[:-1]
    verts = [np.array([0.0, 0.0, radius])]
    for th in polar[1:]:
        ring = np.stack([np.sin(th) * np.cos(azim), np.sin(th) * np.sin(azim), np.full_like(azim, np.cos(th))], 1)
        verts.append(radius * ring)
    verts = np.vstack([verts[0][None], *verts[1:]])
    tris = []
    for j in range(n_segments):  # pole fan
        tris.append([0, 1 + j, 1 + (j + 1) % n_segments])
    for i in range(n_rings - 1):
        base0 = 1 + i * n_segments
        base1 = base0 + n_segments
        for j in range(n_segments):
            j1 = (j + 1) % n_segments
            tris.append([base0 + j, base1 + j, base1 + j1])
            tris.append([base0 + j, base1 + j1, base0 + j1])
    return TriMesh(verts, np.array(tris))


def ledge_mesh(fillet_radius: float = 0.03, top_depth: float = 0.08, drop: float = 0.08,
               width: float = 0.12, n_fillet: int = 12, n_flat: int = 8, n_width: int = 24) -> TriMesh:
    """Rounded rock edge: flat top (z=0, x<=0), quarter-cylinder fillet, vertical face.

    The fillet axis runs along y through (0, y, -fillet_radius)."""
    profile = []
    for x in np.linspace(-top_depth, 0.0, n_flat + 1)[:-1]:
        profile.append((x, 0.0))
    for t in np.linspace(0.0, np.pi / 2, n_fillet + 1):
        profile.append((fillet_radius * np.sin(t), -fillet_radius + fillet_radius * np.cos(t)))
    for z in np.linspace(-fillet_radius, -fillet_radius - drop, n_flat + 1)[1:]:
        profile.append((fillet_radius, z))
    profile = np.array(profile)
    ys = np.linspace(-width / 2, width / 2, n_width + 1)
    pts = np.zeros((len(profile), len(ys), 3))
    pts[:, :, 0] = profile[:, 0, None]
    pts[:, :, 1] = ys[None, :]
    pts[:, :, 2] = profile[:, 1, None]
    mesh = _grid_mesh(pts)
    # make normals point away from the rock (up on the top face)
    if mesh.normals[0, 2] < 0:
        mesh = TriMesh(mesh.vertices, mesh.triangles[:, ::-1])
    return mesh


def plate_mesh(size: float = 0.2, n: int = 10, z: float = 0.0) -> TriMesh:
    g = np.linspace(-size / 2, size / 2, n + 1)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([xx, yy, np.full_like(xx, z)], -1)
    mesh = _grid_mesh(pts)
    if mesh.normals[0, 2] < 0:
        mesh = TriMesh(mesh.vertices, mesh.triangles[:, ::-1])
    return mesh


# ------------------------------------------------------------ segment queries

def segment_triangle_hits(p0: np.ndarray, p1: np.ndarray, tris: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Boolean (S, F): segment [p0, p1] crosses triangle (Moller-Trumbore).

    p0, p1: (S, 3); tris: (F, 3, 3). Touching at an edge or endpoint counts as a hit."""
    return segment_triangle_params(p0, p1, tris, eps)[0]


def segment_triangle_params(p0, p1, tris, eps: float = 1e-12):
    """Hits (S, F) and segment parameter t in [0, 1] at the crossing."""
    p0 = np.asarray(p0, dtype=float).reshape(-1, 3)
    p1 = np.asarray(p1, dtype=float).reshape(-1, 3)
    if len(tris) == 0 or len(p0) == 0:
        shape = (len(p0), len(tris))
        return np.zeros(shape, bool), np.full(shape, np.inf)
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    d = (p1 - p0)[:, None, :]  # (S,1,3)
    h = np.cross(d, e2[None])  # (S,F,3)
    a = np.einsum("fi,sfi->sf", e1, h)
    parallel = np.abs(a) < eps
    inv = np.where(parallel, 0.0, 1.0 / np.where(parallel, 1.0, a))
    s = p0[:, None, :] - v0[None]
    u = inv * np.einsum("sfi,sfi->sf", s, h)
    q = np.cross(s, e1[None])
    v = inv * np.einsum("si,sfi->sf", d[:, 0], q)
    t = inv * np.einsum("fi,sfi->sf", e2, q)
    tol = 1e-12
    hit = (~parallel) & (u >= -tol) & (v >= -tol) & (u + v <= 1 + tol) & (t >= -tol) & (t <= 1 + tol)
    return hit, np.where(hit, t, np.inf)


def paired_segment_triangle_hits(p0, p1, tris, eps: float = 1e-12) -> np.ndarray:
    """Row-wise test: segment i against triangle i. p0, p1 (K, 3), tris (K, 3, 3) -> (K,) bool."""
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    h = np.cross(d, e2)
    a = np.einsum("ki,ki->k", e1, h)
    parallel = np.abs(a) < eps
    inv = 1.0 / np.where(parallel, 1.0, a)
    s = p0 - v0
    u = inv * np.einsum("ki,ki->k", s, h)
    q = np.cross(s, e1)
    v = inv * np.einsum("ki,ki->k", d, q)
    t = inv * np.einsum("ki,ki->k", e2, q)
    tol = 1e-12
    return (~parallel) & (u >= -tol) & (v >= -tol) & (u + v <= 1 + tol) & (t >= -tol) & (t <= 1 + tol)


def point_triangle_distance(p: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Distances (P, F) between points (P, 3) and triangles (F, 3, 3)."""
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    a, b, c = tris[:, 0][None], tris[:, 1][None], tris[:, 2][None]
    P = p[:, None, :]
    ab, ac, ap = b - a, c - a, P - a
    d1 = np.einsum("...i,...i", ab, ap)
    d2 = np.einsum("...i,...i", ac, ap)
    bp = P - b
    d3 = np.einsum("...i,...i", ab, bp)
    d4 = np.einsum("...i,...i", ac, bp)
    cp = P - c
    d5 = np.einsum("...i,...i", ab, cp)
    d6 = np.einsum("...i,...i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        closest = a + ab * v[..., None] + ac * w[..., None]
        # region tests from Ericson, Real-Time Collision Detection 5.1.5
        t_ab = np.clip(d1 / np.where(d1 - d3 != 0, d1 - d3, 1.0), 0, 1)
        t_ac = np.clip(d2 / np.where(d2 - d6 != 0, d2 - d6, 1.0), 0, 1)
        num_bc = d4 - d3
        t_bc = np.clip(num_bc / np.where(num_bc + (d5 - d6) != 0, num_bc + (d5 - d6), 1.0), 0, 1)
    on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    on_bc = (va <= 0) & (num_bc >= 0) & ((d5 - d6) >= 0)
    closest = np.where(on_bc[..., None], b + (c - b) * t_bc[..., None], closest)
    closest = np.where(on_ac[..., None], a + ac * t_ac[..., None], closest)
    closest = np.where(on_ab[..., None], a + ab * t_ab[..., None], closest)
    closest = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, closest)
    closest = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, closest)
    closest = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, closest)
    return np.linalg.norm(P - closest, axis=-1)


def _segments_distance(p1, q1, p2, q2) -> np.ndarray:
    """Vectorized segment-segment distance; all inputs broadcast to (..., 3)."""
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a = np.einsum("...i,...i", d1, d1)
    e = np.einsum("...i,...i", d2, d2)
    f = np.einsum("...i,...i", d2, r)
    c = np.einsum("...i,...i", d1, r)
    b = np.einsum("...i,...i", d1, d2)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-18, np.clip((b * f - c * e) / denom, 0, 1), 0.0)
        t = np.where(e > 1e-18, (b * s + f) / e, 0.0)
        s = np.where(t < 0, np.clip(-c / np.where(a > 0, a, 1), 0, 1), s)
        s = np.where(t > 1, np.clip((b - c) / np.where(a > 0, a, 1), 0, 1), s)
    t = np.clip(t, 0, 1)
    return np.linalg.norm((p1 + d1 * s[..., None]) - (p2 + d2 * t[..., None]), axis=-1)


def segment_triangle_distance(p0: np.ndarray, p1: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Exact distances (S, F) between segments and triangles."""
    p0 = np.asarray(p0, dtype=float).reshape(-1, 3)
    p1 = np.asarray(p1, dtype=float).reshape(-1, 3)
    if len(tris) == 0:
        return np.full((len(p0), 0), np.inf)
    hits = segment_triangle_hits(p0, p1, tris)
    dist = np.minimum(point_triangle_distance(p0, tris), point_triangle_distance(p1, tris))
    P0, P1 = p0[:, None, :], p1[:, None, :]
    for i, j in ((0, 1), (1, 2), (2, 0)):
        dist = np.minimum(dist, _segments_distance(P0, P1, tris[None, :, i], tris[None, :, j]))
    return np.where(hits, 0.0, dist)
