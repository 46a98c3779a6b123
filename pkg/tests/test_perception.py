import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from boomclimb.grasp import GraspScenario, alpha_from_ratio
from boomclimb.limit_surface import MonteCarloConfig, build_limit_surface
from boomclimb.perception import (AlphaMap, Degenerate, DegenerateNeighborhood, EmptyCloud, GraspSite, MsacConfig,
                                  ParseError, PointCloud, SphereCandidate, alpha_map, estimate_normals,
                                  find_sphere_candidates, finger_alphas, load_point_cloud, msac_sphere_fit,
                                  rank_grasp_sites, save_point_cloud, sphere_alpha, sphere_from_points,
                                  synthetic_sphere_cloud, voxel_downsample)
from oracles import hemisphere_cloud, sphere_through


# ---------------------------------------------------------------- I/O

def test_three_point_csv(tmp_path):
    f = tmp_path / "c.csv"
    f.write_text("x,y,z\n0,0,0\n1,2,3\n4.5,5,6\n")
    pc = load_point_cloud(f)
    assert len(pc) == 3 and pc.points[2].tolist() == [4.5, 5, 6]


def test_bad_csv_row_reports_line(tmp_path):
    f = tmp_path / "c.csv"
    f.write_text("0,0,0\n1,2\n")
    with pytest.raises(ParseError, match="line 2"):
        load_point_cloud(f)


def test_ply_vertex_count_mismatch(tmp_path):
    f = tmp_path / "c.ply"
    f.write_text("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                 "property float z\nend_header\n0 0 0\n1 1 1\n")
    with pytest.raises(ParseError, match="line"):
        load_point_cloud(f)


def test_ply_without_magic(tmp_path):
    f = tmp_path / "c.ply"
    f.write_text("format ascii 1.0\n")
    with pytest.raises(ParseError):
        load_point_cloud(f)


def test_empty_cloud(tmp_path):
    f = tmp_path / "c.csv"
    f.write_text("# nothing\n")
    with pytest.raises(EmptyCloud):
        load_point_cloud(f)


@pytest.mark.parametrize("name", ["s.ply", "s.csv"])
def test_synthetic_cloud_round_trips_exactly(tmp_path, name):
    pc = synthetic_sphere_cloud(0.17, noise=0.002, outlier_fraction=0.3, rng=5)
    save_point_cloud(pc, tmp_path / name)
    assert load_point_cloud(tmp_path / name).points.tobytes() == pc.points.tobytes()


def test_colors_survive_ply(tmp_path):
    pc = PointCloud(np.eye(3), np.array([[1, 2, 3], [4, 5, 6], [255, 0, 7]]))
    save_point_cloud(pc, tmp_path / "c.ply")
    back = load_point_cloud(tmp_path / "c.ply")
    np.testing.assert_array_equal(back.colors, pc.colors)


# ---------------------------------------------------------------- downsampling

def test_one_voxel_gives_centroid():
    pts = np.array([[0.001, 0.001, 0.001], [0.002, 0.004, 0.003], [0.004, 0.0, 0.002]])
    out = voxel_downsample(PointCloud(pts), 0.005)
    assert len(out) == 1
    np.testing.assert_allclose(out.points[0], pts.mean(axis=0), atol=1e-18)


def test_spread_points_unchanged():
    centers = (np.array(np.meshgrid(range(4), range(4), range(4))).reshape(3, -1).T + 0.5) * 0.005
    assert len(voxel_downsample(PointCloud(centers), 0.005)) == 64


def test_millimetre_lattice_counts():
    g = (np.arange(50) + 0.5) * 1e-3
    pts = np.array(np.meshgrid(g, g, g)).reshape(3, -1).T
    out = voxel_downsample(PointCloud(pts), 0.005)
    assert len(out) * 125 == len(pts)


@given(st.integers(0, 2**31), st.floats(0.002, 0.05))
def test_downsample_idempotent(seed, voxel):
    pts = np.random.default_rng(seed).uniform(-0.2, 0.2, (300, 3))
    once = voxel_downsample(PointCloud(pts), voxel)
    assert len(voxel_downsample(once, voxel)) == len(once)


# ---------------------------------------------------------------- spheres

@given(st.integers(0, 2**31))
def test_four_point_sphere_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(4, 3))
    assume(abs(np.linalg.det(np.hstack([P, np.ones((4, 1))]))) > 1e-3)
    c, r, ok = sphere_from_points(P)
    c0, r0 = sphere_through(P)
    assert ok
    np.testing.assert_allclose(c, c0, rtol=1e-8, atol=1e-8)
    assert r == pytest.approx(r0, rel=1e-8)


def test_coplanar_quadruple_rejected():
    P = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float)
    assert not sphere_from_points(P)[2]


def test_noiseless_sphere_recovered():
    cands = msac_sphere_fit(synthetic_sphere_cloud(0.17, rng=1))
    assert len(cands) == 1
    assert abs(cands[0].radius - 0.17) <= 0.001
    np.testing.assert_allclose(cands[0].center, [0, 0, 1], atol=1e-3)


def test_large_sphere_discarded():
    assert msac_sphere_fit(synthetic_sphere_cloud(0.3, rng=2)) == []


@pytest.mark.parametrize("seed", range(5))
def test_noisy_sphere_with_outliers(seed):
    pc = synthetic_sphere_cloud(0.17, noise=0.002, outlier_fraction=0.3, rng=seed)
    cands = find_sphere_candidates(pc, 0.005, MsacConfig(seed=seed))
    assert cands and abs(cands[0].radius - 0.17) <= 0.05 * 0.17


def test_msac_deterministic():
    pc = synthetic_sphere_cloud(0.12, noise=0.002, outlier_fraction=0.2, rng=3)
    assert msac_sphere_fit(pc, MsacConfig(seed=9)) == msac_sphere_fit(pc, MsacConfig(seed=9))


def test_planar_cloud_is_degenerate():
    g = np.linspace(0, 1, 20)
    pts = np.array(np.meshgrid(g, g, [0.0])).reshape(3, -1).T
    with pytest.raises(Degenerate):
        msac_sphere_fit(PointCloud(pts))
    with pytest.raises(Degenerate):
        msac_sphere_fit(PointCloud(pts[:3]))


# ---------------------------------------------------------------- normals

def test_plane_seen_from_above():
    g = np.linspace(-0.1, 0.1, 15)
    pts = np.array(np.meshgrid(g, g, [0.0])).reshape(3, -1).T
    n = estimate_normals(PointCloud(pts), 10, viewpoint=(0, 0, 1))
    np.testing.assert_allclose(n, np.tile([0, 0, 1.0], (len(pts), 1)), atol=1e-12)


def test_sphere_normals_are_radial():
    pts = hemisphere_cloud()
    n = estimate_normals(PointCloud(pts), 30, viewpoint=(0, 0, 10))
    radial = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    ang = np.degrees(np.arccos(np.clip(np.sum(n * radial, axis=1), -1, 1)))
    assert ang.max() < 5.0


def test_whole_cloud_neighbourhood_gives_one_plane():
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-1, 1, (40, 2)), 0.3 * rng.uniform(-1, 1, 40) * 1e-3])
    n = estimate_normals(PointCloud(pts), 40, viewpoint=(0, 0, 5))
    np.testing.assert_allclose(n, np.tile(n[0], (40, 1)), atol=1e-12)


def test_collinear_neighbourhood():
    pts = np.column_stack([np.linspace(0, 1, 10), np.zeros(10), np.zeros(10)])
    with pytest.raises(DegenerateNeighborhood):
        estimate_normals(PointCloud(pts), 4)


# ---------------------------------------------------------------- alpha maps

def test_facing_patch_not_graspable():
    amap = alpha_map(PointCloud(np.zeros((5, 3))), np.tile([0, 0, 1.0], (5, 1)))
    assert np.all(amap.alpha == 0) and not amap.graspable.any()


def test_field_style_patch_fully_graspable():
    ang = np.radians(np.linspace(55, 60, 11))
    normals = np.column_stack([np.sin(ang), np.zeros_like(ang), np.cos(ang)])
    assert alpha_map(PointCloud(np.zeros((11, 3))), normals).graspable.all()


def test_hemisphere_annulus_matches_rings():
    voxel = 0.005
    radius = 0.15
    pc = voxel_downsample(PointCloud(hemisphere_cloud(radius, 20000)), voxel)
    amap = alpha_map(pc, estimate_normals(pc, 30, viewpoint=(0, 0, 10)))
    polar = np.arccos(np.clip(pc.points[:, 2] / np.linalg.norm(pc.points, axis=1), -1, 1))
    truth = (polar >= np.radians(25)) & (polar <= np.radians(85))
    wrong = amap.graspable != truth
    ring_gap = np.minimum(np.abs(polar - np.radians(25)), np.abs(polar - np.radians(85))) * radius
    assert np.all(ring_gap[wrong] <= voxel)


@settings(max_examples=15)
@given(st.integers(0, 2**31))
def test_alpha_invariant_under_rigid_rotation(seed):
    pts = hemisphere_cloud(0.15, 1500)
    R = Rotation.random(random_state=seed).as_matrix()
    view = np.array([0, 0, 10.0])
    a = alpha_map(PointCloud(pts), estimate_normals(PointCloud(pts), 20, view))
    turned = PointCloud(pts @ R.T)
    b = alpha_map(turned, estimate_normals(turned, 20, R @ view), R @ np.array([0, 0, 1.0]))
    np.testing.assert_allclose(b.alpha, a.alpha, atol=1e-6)


def test_alpha_axis_must_be_unit():
    with pytest.raises(ValueError):
        alpha_map(PointCloud(np.zeros((1, 3))), np.array([[0, 0, 1.0]]), (0, 0, 2.0))


def test_finger_sectors_on_hemisphere():
    pc = PointCloud(hemisphere_cloud(0.15, 3000))
    amap = alpha_map(pc, estimate_normals(pc, 20, (0, 0, 10)))
    alphas = finger_alphas(pc, amap, center=np.zeros(3))
    assert alphas is not None
    np.testing.assert_allclose(alphas, alphas[0], atol=np.radians(1))


# ---------------------------------------------------------------- ranking

def _surface(mu, cfg=MonteCarloConfig(n_grid=3, n_mc=40)):
    return build_limit_surface(GraspScenario(alpha=0.67, rock_radius=0.116, wrist_offset=0.045, mu=mu), cfg)


def test_higher_friction_ranks_first():
    ranked = rank_grasp_sites([GraspSite("a", _surface(0.39)), GraspSite("b", _surface(0.78))], (0.0, 0.0))
    assert [i for i, _ in ranked] == ["b", "a"] and ranked[0][1] > ranked[1][1]


def test_single_site():
    assert len(rank_grasp_sites([GraspSite("only", _surface(0.39))], (0.3, 0.2))) == 1


def test_ungraspable_site_scores_zero_and_ranks_last():
    flat = AlphaMap(np.full(4, 0.1), np.zeros(4, bool), np.array([0, 0, 1.0]), np.radians(25), np.radians(85))
    s = _surface(0.39)
    ranked = rank_grasp_sites([GraspSite("a", s, flat), GraspSite("b", s)], (0.0, 0.0))
    assert ranked[-1] == ("a", 0.0)


def test_ties_broken_by_id():
    s = _surface(0.39)
    ranked = rank_grasp_sites([GraspSite("z", s), GraspSite("m", s), GraspSite("q", s)], (0.0, 0.0))
    assert [i for i, _ in ranked] == ["m", "q", "z"]


def test_sphere_alpha_from_ratio():
    c = SphereCandidate((0, 0, 1), 0.17, 100, 0.5)
    assert sphere_alpha(c, 0.06) == alpha_from_ratio(0.06 / 0.17)
