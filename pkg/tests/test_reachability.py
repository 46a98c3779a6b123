import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boomclimb.mesh import empty_mesh, hemisphere_mesh, ledge_mesh, plate_mesh
from boomclimb.reachability import (AXES, BasePose, FingerCase, FingerState, base_pose_for, cases_csv,
                                    compare_cases, finger_cases, finger_collides, phalanges, reachable_faces,
                                    sample_finger_states, spine_segment)
from oracles import brute_force_reach, segment_hits_triangle

COARSE = dict(angle_step=30.0, travel_step=0.01)


def _plate_pose(height):
    return BasePose(np.array([0.0, 0.0, height]), np.eye(3))


# ---------------------------------------------------------------- state grids

def test_case_one_has_thirty_seven_states():
    assert FingerCase(1).n_states == 37
    assert len(list(sample_finger_states(FingerCase(1)))) == 37


def test_state_counts_match_range_products():
    # grid sizes: base 37, flex 25, abduction 19, twist 13, spine rotation 19, tangential 11, normal 6
    sizes = {"base": 37, "flex": 25, "abduction": 19, "twist": 13, "spine_rotation": 19, "tangential": 11,
             "normal": 6}
    enabled = [["base"], ["base", "flex"], ["base", "flex", "abduction", "twist"],
               ["base", "flex", "abduction", "twist", "spine_rotation"], list(sizes)]
    counts = [c.n_states for c in finger_cases()]
    assert counts == [int(np.prod([sizes[n] for n in e])) for e in enabled]
    assert all(a < b for a, b in zip(counts, counts[1:]))


def test_grids_contain_zero_and_nest():
    cases = finger_cases()
    for a, b in zip(cases, cases[1:]):
        for name in AXES:
            assert 0.0 in a.axis_values(name)
            assert np.all(np.isin(a.axis_values(name), b.axis_values(name)))


def test_range_without_zero_rejected():
    with pytest.raises(ValueError):
        FingerCase(2, flex_range=(10.0, 120.0))
    with pytest.raises(ValueError):
        FingerCase(6)


# ---------------------------------------------------------------- kinematics and collision

def test_straight_finger_hangs_along_the_base_normal():
    case = FingerCase(5)
    pose = base_pose_for(plate_mesh(), [0, 0, 0], standoff=0.2)
    joint, tip, _ = phalanges(pose, case, 0.0, 0.0, 0.0)
    np.testing.assert_allclose(joint, [0, 0, 0.2 - 0.060], atol=1e-15)
    np.testing.assert_allclose(tip, [0, 0, 0.2 - 0.113], atol=1e-15)
    a, b = spine_segment(pose, case, FingerState(0, 0, 0, 0, 0, 0, 0.004))
    np.testing.assert_allclose(b - a, [0, 0, -0.009], atol=1e-15)


@given(st.integers(0, 2**31))
def test_mirrored_pose_is_proper_and_mirrors_the_tip(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.linalg.det(q))
    pose = BasePose(rng.normal(size=3), q)
    m = pose.mirrored(0)
    assert np.linalg.det(m.rotation) == pytest.approx(1.0)
    case = FingerCase(3)
    b, f, a = rng.uniform(-1, 1, 3)
    _, tip, _ = phalanges(pose, case, b, f, a)
    _, tip_m, _ = phalanges(m, case, b, f, -a)  # rotations about the lateral axis keep their sign
    np.testing.assert_allclose(tip_m, tip * [-1, 1, 1], atol=1e-12)


def test_finger_above_the_mesh_is_free():
    mesh = hemisphere_mesh(0.1, n_rings=6, n_segments=12)
    case = FingerCase(2)
    pose = BasePose(np.array([0, 0, 0.3]), np.eye(3))
    for s in sample_finger_states(case):
        assert not finger_collides(s, mesh, pose, case)


def test_phalange_through_a_facet_centroid_collides():
    mesh = plate_mesh(size=0.2, n=4)
    c = mesh.centroids[5]
    pose = BasePose(c + [0, 0, 0.03], np.eye(3))
    case = FingerCase(1)
    assert finger_collides(FingerState(0, 0, 0, 0, 0, 0, 0), mesh, pose, case)
    # the same finger folded back up clears the plate
    assert not finger_collides(FingerState(np.pi, 0, 0, 0, 0, 0, 0), mesh, pose, case)


@given(st.integers(0, 2**31))
def test_collision_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    mesh = hemisphere_mesh(0.1, n_rings=4, n_segments=8)
    case = FingerCase(3)
    pose = base_pose_for(mesh, [0.0, 0.0, 0.1], standoff=rng.uniform(0.0, 0.15))
    s = FingerState(*rng.uniform(-np.pi / 2, np.pi / 2, 4), 0.0, 0.0, 0.0)
    joint, tip, _ = phalanges(pose, case, s.base, s.flex, s.abduction, s.twist)
    expect = any(segment_hits_triangle(a, b, t) for t in mesh.corners
                 for a, b in ((pose.position, joint), (joint, tip)))
    assert finger_collides(s, mesh, pose, case) == expect


# ---------------------------------------------------------------- reachable faces

@pytest.mark.parametrize("case_id", [1, 2, 3, 5])
def test_reachable_faces_match_brute_force(case_id):
    mesh = plate_mesh(size=0.24, n=3)
    case = FingerCase(case_id, **COARSE)
    pose = _plate_pose(0.09)
    res = reachable_faces(case, mesh, pose)
    oracle = brute_force_reach(sample_finger_states(case), mesh, pose.position, pose.rotation, case.proximal,
                               case.distal, case.spine_length, (10.0, 30.0))
    np.testing.assert_array_equal(res.faces, oracle)


def test_aligned_single_phalange_on_a_plate_reaches_nothing():
    # spine meets the plate head-on, 0 deg from the normal, outside the attack window
    mesh = plate_mesh()
    case = FingerCase(1, base_range=(0.0, 0.0))
    pose = _plate_pose(0.115)  # rigid finger of 113 mm ends 2 mm above the plate
    assert not finger_collides(FingerState(0, 0, 0, 0, 0, 0, 0), mesh, pose, case)
    assert reachable_faces(case, mesh, pose).area == 0.0
    # the spine does touch the plate: an attack window including 0 deg finds it
    assert reachable_faces(case, mesh, pose, window=(0.0, 30.0)).area > 0


def test_empty_mesh_reaches_nothing():
    pose = _plate_pose(0.1)
    res = compare_cases(empty_mesh(), pose, finger_cases(**COARSE))
    assert [r.area for r in res] == [0.0] * 5 and all(r.faces.size == 0 for r in res)


@pytest.fixture(scope="module")
def hemisphere_results():
    mesh = hemisphere_mesh(0.1)
    pose = base_pose_for(mesh, [0.0, 0.0, 0.1])
    start = time.perf_counter()
    res = compare_cases(mesh, pose)
    return mesh, pose, res, time.perf_counter() - start


def test_cases_nest_on_the_hemisphere(hemisphere_results):
    mesh, _, res, _ = hemisphere_results
    for a, b in zip(res, res[1:]):
        assert set(a.faces) <= set(b.faces) and a.area <= b.area
    assert res[-1].area > res[-2].area


def test_area_is_the_sum_of_face_areas(hemisphere_results):
    mesh, _, res, _ = hemisphere_results
    for r in res:
        assert r.area == float(mesh.areas[r.faces].sum())


def test_single_case_agrees_with_the_comparison(hemisphere_results):
    mesh, pose, res, _ = hemisphere_results
    alone = reachable_faces(FingerCase(4), mesh, pose)
    np.testing.assert_array_equal(alone.faces, res[3].faces)


def test_reach_is_deterministic(hemisphere_results):
    mesh, pose, res, _ = hemisphere_results
    again = compare_cases(mesh, pose)
    assert cases_csv(again) == cases_csv(res)


def test_csv_layout(hemisphere_results):
    lines = cases_csv(hemisphere_results[2]).splitlines()
    assert lines[0] == "case,area_m2,faces" and [l.split(",")[0] for l in lines[1:]] == list("12345")


def test_mirrored_pose_on_a_symmetric_mesh_gives_the_same_area():
    mesh = hemisphere_mesh(0.1, n_rings=12, n_segments=24)
    pose = base_pose_for(mesh, [0.05, 0.0, np.sqrt(0.1**2 - 0.05**2)], plane_hint=(0, 1, 0))
    cases = finger_cases(angle_step=10.0, travel_step=0.005)
    a = compare_cases(mesh, pose, cases)
    exact = compare_cases(mesh.mirrored(0), pose.mirrored(0), cases)
    # the cell diagonals flip under reflection, so the same triangulation only agrees to discretisation
    same = compare_cases(mesh, pose.mirrored(0), cases)
    for ra, re, rs in zip(a, exact, same):
        assert ra.area == re.area
        assert rs.area == pytest.approx(ra.area, rel=0.05, abs=1e-15)


def test_mirror_of_mesh_and_pose_is_exact():
    mesh = ledge_mesh(n_fillet=6, n_flat=4, n_width=8)
    pose = base_pose_for(mesh, [0.02, 0.01, -0.01])
    cases = finger_cases(angle_step=15.0, travel_step=0.005)
    a = compare_cases(mesh, pose, cases)
    b = compare_cases(mesh.mirrored(1), pose.mirrored(1), cases)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.faces, rb.faces)


def test_wider_window_never_loses_faces():
    mesh = ledge_mesh(n_fillet=6, n_flat=4, n_width=8)
    pose = base_pose_for(mesh, [0.02, 0.0, -0.01])
    case = FingerCase(4, angle_step=15.0)
    narrow = reachable_faces(case, mesh, pose, window=(10.0, 30.0))
    wide = reachable_faces(case, mesh, pose, window=(5.0, 45.0))
    assert set(narrow.faces) <= set(wide.faces)


@pytest.mark.slow
def test_refined_grid_changes_case_five_by_under_ten_percent(hemisphere_results):
    mesh, pose, res, _ = hemisphere_results
    fine = reachable_faces(FingerCase(5).refined(2), mesh, pose)
    assert abs(fine.area - res[-1].area) <= 0.10 * res[-1].area
