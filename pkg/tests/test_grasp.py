import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import assume, given
from hypothesis import strategies as st

from boomclimb.grasp import (SECTOR, ContactLost, GraspScenario, PullDirection, alpha_from_ratio, assemble_grasp_system,
                             engaged_split, field_test_scenario, grasp_matrix, ratio_from_alpha, solve_contact_forces,
                             spine_holds, spine_no_slip, unit_contact_forces)
from oracles import equilibrium_residual, typed_symmetric_matrix

angles = st.floats(0.0, math.pi / 2)
forces = st.floats(-50.0, 50.0)


# ---------------------------------------------------------------- spine law

def test_coulomb_limit_reduces_to_ratio():
    assert spine_no_slip(3.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.39)
    assert not spine_no_slip(4.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.39)


def test_coulomb_boundary_counts_as_holding():
    assert spine_no_slip(0.39 * 10.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.39)


def test_lost_contact_raises():
    with pytest.raises(ContactLost):
        spine_no_slip(0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.39)


@given(forces, st.floats(0.1, 50), forces, st.floats(0, 20), angles, angles, st.floats(0.05, 2.0))
def test_no_slip_matches_rotated_frame(ft, fn, fc, fp, psi, alpha, mu):
    # resolve the spine load in the asperity frame with an explicit rotation
    f = np.array([ft + fp * math.cos(alpha), fn + fp * math.sin(alpha)])
    R = np.array([[math.cos(psi), -math.sin(psi)], [math.sin(psi), math.cos(psi)]])
    tang, norm = R @ f
    assume(norm > 1e-6)
    lhs, rhs = math.hypot(tang, fc), mu * norm
    assume(abs(lhs - rhs) > 1e-9 * (1 + rhs))
    assert spine_no_slip(ft, fn, fc, fp, psi, alpha, mu) == (lhs <= rhs)


@given(forces, st.floats(0.1, 50), forces, st.floats(0, 20), angles, angles, st.floats(0.05, 1.0), st.floats(0, 1.0))
def test_no_slip_monotone_in_friction(ft, fn, fc, fp, psi, alpha, mu, extra):
    try:
        low = spine_no_slip(ft, fn, fc, fp, psi, alpha, mu)
    except ContactLost:
        return
    if low:
        assert spine_no_slip(ft, fn, fc, fp, psi, alpha, mu + extra)


@given(forces, st.floats(0.1, 50), forces, st.floats(0, 20), angles, angles)
def test_array_form_agrees(ft, fn, fc, fp, psi, alpha):
    try:
        ref = spine_no_slip(ft, fn, fc, fp, psi, alpha, 0.39)
    except ContactLost:
        ref = False
    assert bool(spine_holds(ft, fn, fc, fp, psi, alpha, 0.39)) == ref


# ---------------------------------------------------------------- grasp system

@given(st.floats(0.01, 1.5))
def test_symmetric_matrix_matches_typed_entries(a):
    scn = GraspScenario(alpha=a, rock_radius=0.1, wrist_offset=0.02)
    np.testing.assert_allclose(grasp_matrix(scn), typed_symmetric_matrix(a, 15.0, 3e6, 1.0), rtol=0, atol=1e-12)


def test_symmetric_z_moment_row_is_exact():
    A = grasp_matrix(GraspScenario(alpha=0.7, rock_radius=0.1, wrist_offset=0.0))
    assert A[5].tolist() == [0, 0, 1, 0, 0, 1, 0, 0, 1]


def test_zero_alpha_kills_moment_entries():
    A = grasp_matrix(GraspScenario(alpha=0.0, rock_radius=0.1, wrist_offset=0.0))
    assert not A[3].any()
    assert not A[4].any()


def test_field_parameters_give_invertible_system():
    A, _ = assemble_grasp_system(field_test_scenario(), (0.0, 0.0), 1.0)
    lu, piv = scipy.linalg.lu_factor(A)
    det = np.prod(np.diag(lu))
    assert np.isfinite(det) and det != 0.0


def test_zero_pull_gives_zero_forces():
    f = solve_contact_forces(field_test_scenario(), (0.4, 1.0), 0.0)
    assert not f.vector.any()


def test_axial_pull_is_shared_equally():
    f = solve_contact_forces(GraspScenario(alpha=0.6, rock_radius=0.116, wrist_offset=0.045), (0.0, 0.0), 10.0)
    pf = f.per_finger
    np.testing.assert_allclose(pf[:, :2], np.repeat(pf[:1, :2], 3, axis=0), atol=1e-9)
    np.testing.assert_allclose(f.circumferential, 0.0, atol=1e-9)


def test_field_axial_solve_matches_least_squares():
    scn = field_test_scenario()
    A, B = assemble_grasp_system(scn, (0.0, 0.0), 10.0)
    ref = np.linalg.lstsq(A, B, rcond=None)[0]
    np.testing.assert_allclose(solve_contact_forces(scn, (0.0, 0.0), 10.0).vector, ref, atol=1e-9)


@given(st.floats(0, math.pi / 2), st.floats(0, 2 * math.pi), st.floats(0, 200),
       st.tuples(st.floats(0.1, 1.4), st.floats(0.1, 1.4), st.floats(0.1, 1.4)))
def test_contact_forces_balance_the_pull(beta, phi, pull, alphas):
    scn = GraspScenario(alpha=alphas, rock_radius=0.116, wrist_offset=0.045)
    f = solve_contact_forces(scn, PullDirection(beta, phi), pull).vector
    fres, mres = equilibrium_residual(alphas, 0.116, 0.045, beta, phi, pull, f)
    assert np.abs(fres).max() <= 1e-9 * (1 + pull)
    assert np.abs(mres).max() <= 1e-9 * (1 + pull)


@given(st.floats(0, math.pi / 2), st.floats(0, 2 * math.pi), st.floats(0.1, 1.4))
def test_symmetric_solution_permutes_with_sector(beta, phi, a):
    scn = GraspScenario(alpha=a, rock_radius=0.116, wrist_offset=0.045)
    f0 = solve_contact_forces(scn, (beta, phi), 10.0).per_finger
    f1 = solve_contact_forces(scn, (beta, phi + SECTOR), 10.0).per_finger
    np.testing.assert_allclose(f1, np.roll(f0, 1, axis=0), atol=1e-9)


@given(st.floats(0, math.pi / 2), st.floats(0, 2 * math.pi))
def test_forces_scale_linearly(beta, phi):
    scn = field_test_scenario()
    one = solve_contact_forces(scn, (beta, phi), 1.0).vector
    ten = solve_contact_forces(scn, (beta, phi), 10.0).vector
    np.testing.assert_allclose(10 * one, ten, atol=1e-9)


@given(st.floats(0, math.pi / 2), st.floats(-10, 10))
def test_unit_forces_periodic_for_symmetric_hand(beta, phi):
    scn = GraspScenario(alpha=0.67, rock_radius=0.116, wrist_offset=0.045)
    a = unit_contact_forces(scn, beta, phi)
    b = unit_contact_forces(scn, beta, phi + SECTOR)
    np.testing.assert_allclose(b, np.roll(a, 1, axis=0), atol=1e-12)


def test_scenario_validation():
    with pytest.raises(ValueError):
        GraspScenario(alpha=2.0, rock_radius=0.1, wrist_offset=0.0)
    with pytest.raises(ValueError):
        GraspScenario(alpha=0.5, rock_radius=-1.0, wrist_offset=0.0)


def test_engaged_split():
    assert engaged_split(20) == (7, 7, 6)
    assert sum(engaged_split(31)) == 31


# ---------------------------------------------------------------- closure

def test_alpha_from_ratio_endpoints():
    assert alpha_from_ratio(0.0) == 0.0
    assert alpha_from_ratio(1.0) == math.pi / 2


def test_alpha_from_ratio_closed_form():
    q = 0.35
    assert alpha_from_ratio(q) == pytest.approx(math.acos((1 - q * q) / (1 + q * q)), abs=1e-12)
    assert math.degrees(alpha_from_ratio(q)) == pytest.approx(38.6, abs=0.05)


@given(st.floats(0.0, 1.0))
def test_ratio_round_trip(q):
    assert abs(ratio_from_alpha(alpha_from_ratio(q)) - q) <= 1e-12


@given(st.floats(0.0, math.pi / 2))
def test_alpha_round_trip(a):
    assert abs(alpha_from_ratio(ratio_from_alpha(a)) - a) <= 1e-12


def test_negative_ratio_rejected():
    with pytest.raises(ValueError):
        alpha_from_ratio(-0.1)
