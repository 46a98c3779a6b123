"""Three-finger microspine grasp on a spherical rock patch.

Contact force vector ordering is ``[F_n1, F_t1, F_c1, F_n2, F_t2, F_c2, F_n3, F_t3, F_c3]``.
Rows 1-3 of the grasp system are force balance, rows 4-5 the x/y moment balance divided
by the rock radius, row 6 the z moment balance, rows 7-9 the compliance (no lift-off,
no penetration) relations between fingertip forces.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Union

import numpy as np

SQRT3 = np.sqrt(3.0)
SECTOR = 2 * np.pi / 3
FINGER_AZIMUTH = np.array([0.0, SECTOR, 2 * SECTOR])


class ContactLost(Exception):
    pass


class SingularGrasp(Exception):
    pass


@dataclass(frozen=True)
class GraspScenario:
    alpha: tuple  # rad, one per finger
    rock_radius: float  # m
    wrist_offset: float  # m, wrist standoff x from the rock surface
    link_length: float = 0.06  # m
    mu: float = 0.39
    k_n: float = 15.0
    k_t: float = 3e6
    k_c: float = 1.0
    n_spines: Union[int, tuple] = 20  # per finger, or one count per finger
    f_int: float = 6.0  # N, grasp force per finger shared by its engaged spines
    f_max: float = 12.0  # N, per-spine tangential strength

    def __post_init__(self):
        alpha = tuple(float(a) for a in np.broadcast_to(np.asarray(self.alpha, dtype=float), (3,)))
        object.__setattr__(self, "alpha", alpha)
        if self.rock_radius <= 0:
            raise ValueError("rock radius must be positive")
        if any(not 0.0 <= a < np.pi / 2 for a in alpha):
            raise ValueError("alpha must lie in [0, pi/2)")
        if self.mu <= 0 or min(self.k_n, self.k_t, self.k_c) <= 0:
            raise ValueError("friction and stiffnesses must be positive")
        if min(self.spine_counts) < 1:
            raise ValueError("each finger needs at least one spine")

    @property
    def spine_counts(self) -> tuple:
        if isinstance(self.n_spines, (int, np.integer)):
            return (int(self.n_spines),) * 3
        return tuple(int(n) for n in self.n_spines)

    @property
    def symmetric(self) -> bool:
        return len(set(self.alpha)) == 1 and len(set(self.spine_counts)) == 1

    def with_(self, **changes) -> "GraspScenario":
        return replace(self, **changes)


def field_test_scenario(**changes) -> GraspScenario:
    """Asymmetric three-finger hand on a 116 mm rock, as measured in a field grasp."""
    scn = GraspScenario(alpha=(1.22, 0.52, 0.70), rock_radius=0.116, wrist_offset=0.045, mu=0.39,
                        k_n=15.0, k_t=3e6, k_c=1.0, n_spines=20, f_int=6.0, f_max=12.0)
    return replace(scn, **changes) if changes else scn


def engaged_split(n_engaged: int) -> tuple:
    """Split a per-hand engaged spine count over three fingers, larger shares first."""
    base, extra = divmod(int(n_engaged), 3)
    return tuple(base + (1 if i < extra else 0) for i in range(3))


class PullDirection(NamedTuple):
    beta: float  # polar angle from the wrist axis
    phi: float  # azimuth


# ------------------------------------------------------------------ spine law

def spine_no_slip(F_t, F_n, F_c, F_p, psi, alpha, mu) -> bool:
    """Coulomb no-slip test for one spine resting on an asperity of slope `psi`."""
    den = F_t * np.sin(psi) + F_n * np.cos(psi) + F_p * np.sin(alpha + psi)
    if den <= 0:
        raise ContactLost(f"spine normal load {den:.3g} N is not compressive")
    num = np.hypot(F_t * np.cos(psi) - F_n * np.sin(psi) + F_p * np.cos(alpha + psi), F_c)
    return bool(num <= mu * den)


def spine_holds(F_t, F_n, F_c, F_p, psi, alpha, mu, f_max=np.inf):
    """Array form of the spine test: False for slip, lost contact or overload."""
    sp, cp = np.sin(psi), np.cos(psi)
    sa, ca = np.sin(alpha + psi), np.cos(alpha + psi)
    den = F_t * sp + F_n * cp + F_p * sa
    tang = F_t * cp - F_n * sp + F_p * ca
    num = np.sqrt(tang * tang + F_c * F_c)
    unloaded = (num == 0) & (den == 0)
    ok = ((den > 0) & (num <= mu * den)) | unloaded
    return ok & (np.sqrt(F_t * F_t + F_c * F_c) <= f_max)


# ---------------------------------------------------------------- grasp system

def grasp_matrix(scn: GraspScenario) -> np.ndarray:
    """9 x 9 compliant grasp matrix; each finger's column block uses its own alpha."""
    a = np.asarray(scn.alpha)
    s, c = np.sin(a), np.cos(a)
    kn, kt, kc = scn.k_n, scn.k_t, scn.k_c
    # z-moment row: true moment / (r * mean sin alpha); exactly [0,0,1]*3 when symmetric
    sbar = s.mean()
    zrow = s / sbar if sbar > 1e-12 else np.ones(3)
    if np.all(s == s[0]):
        zrow = np.ones(3)
    h = SQRT3 / 2
    A = np.zeros((9, 9))
    s1, s2, s3 = s
    c1, c2, c3 = c
    A[0] = [s1, c1, 0, -s2 / 2, -c2 / 2, -h, -s3 / 2, -c3 / 2, h]
    A[1] = [0, 0, 1, h * s2, h * c2, -0.5, -h * s3, -h * c3, -0.5]
    A[2] = [c1, -s1, 0, c2, -s2, 0, c3, -s3, 0]
    A[3] = [0, 0, 0, h * s2 * c2, -h * s2 * s2, 0, -h * s3 * c3, h * s3 * s3, 0]
    A[4] = [-s1 * c1, s1 * s1, 0, 0.5 * s2 * c2, -0.5 * s2 * s2, 0, 0.5 * s3 * c3, -0.5 * s3 * s3, 0]
    A[5] = [0, 0, zrow[0], 0, 0, zrow[1], 0, 0, zrow[2]]
    A[6] = [s1 / kn, c1 / kt, 0, s2 / kn, c2 / kt, 0, s3 / kn, c3 / kt, 0]
    A[7] = [s1 / kn, c1 / kt, 0, 0, 0, 1 / (SQRT3 * kc), 0, 0, -1 / (SQRT3 * kc)]
    A[8] = [s1 / (2 * kn), c1 / (2 * kt), SQRT3 / (2 * kc), 0, 0, 0, s3 / kn, c3 / kt, 0]
    return A


def wrist_height(scn: GraspScenario) -> float:
    """Wrist height above the contact centroid, in units of the rock radius."""
    return 1.0 - float(np.mean(np.cos(scn.alpha))) + scn.wrist_offset / scn.rock_radius


def _direction(direction):
    if isinstance(direction, PullDirection):
        return float(direction.beta), float(direction.phi)
    beta, phi = direction
    return float(beta), float(phi)


def pull_vector(scn: GraspScenario, direction, f_pull: float) -> np.ndarray:
    """Right-hand side: contact forces balance a pull of `f_pull` along (beta, phi) at the wrist."""
    beta, phi = _direction(direction)
    sb, cb, sf, cf = np.sin(beta), np.cos(beta), np.sin(phi), np.cos(phi)
    arm = wrist_height(scn)
    return np.array([
        -f_pull * sb * cf,
        -f_pull * sb * sf,
        -f_pull * cb,
        f_pull * sb * sf * arm,
        -f_pull * sb * cf * arm,
        0.0, 0.0, 0.0, 0.0,
    ])


def assemble_grasp_system(scn: GraspScenario, direction, f_pull: float):
    return grasp_matrix(scn), pull_vector(scn, direction, f_pull)


@dataclass(frozen=True, eq=False)
class ContactForces:
    vector: np.ndarray  # (9,) ordered F_n, F_t, F_c per finger

    @property
    def per_finger(self) -> np.ndarray:
        return self.vector.reshape(3, 3)

    @property
    def normal(self) -> np.ndarray:
        return self.vector[0::3]

    @property
    def tangential(self) -> np.ndarray:
        return self.vector[1::3]

    @property
    def circumferential(self) -> np.ndarray:
        return self.vector[2::3]


def solve_contact_forces(scn: GraspScenario, direction, f_pull: float) -> ContactForces:
    A, B = assemble_grasp_system(scn, direction, f_pull)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e13:
        raise SingularGrasp(f"grasp matrix is singular for alpha = {scn.alpha} (cond {cond:.3g})")
    return ContactForces(np.linalg.solve(A, B))


def unit_contact_forces(scn: GraspScenario, beta: float, phi: float) -> np.ndarray:
    """Per-finger (F_n, F_t, F_c) for a 1 N pull, shape (3, 3).

    For a symmetric hand the azimuth is first reduced into [0, 2 pi / 3) and the finger
    rows rolled back, so results are exactly periodic in phi."""
    if scn.symmetric:
        shift = int(np.floor(phi / SECTOR))
        F = solve_contact_forces(scn, (beta, phi - shift * SECTOR), 1.0).per_finger
        return np.roll(F, shift % 3, axis=0)
    return solve_contact_forces(scn, (beta, phi), 1.0).per_finger


# ------------------------------------------------------- ratio <-> alpha closure

def alpha_from_ratio(ratio: float) -> float:
    """Fingertip contact angle for link length / rock radius (wrist on the surface).

    Equivalent to ``arccos((1 - q^2) / (1 + q^2))``, written as ``2 atan(q)`` which
    stays accurate for small ratios."""
    if ratio < 0:
        raise ValueError("ratio must be non-negative")
    return 2.0 * np.arctan(ratio)


def ratio_from_alpha(alpha: float) -> float:
    return float(np.tan(0.5 * alpha))
