"""Monte Carlo pull-force limit surface of a microspine grasp.

For each pull direction the pull force is raised in fixed steps. At every step each
active spine is tested for slip, and each finger for overload and lift-off. Failed
spines stay failed and their share goes to the rest of the finger. A grasp fails once a
finger has no active spines, its spines are overloaded, or the finger lifts off. The
bracketing step is then refined by bisection.

Slip at a spine does not depend on how many spines share the finger load (the finger
force and the grip force are both split evenly), so the slip test is evaluated for all
spines at once and the redistribution only enters the strength check.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .grasp import SECTOR, GraspScenario, PullDirection, unit_contact_forces


class NoFailureBelowCap(Exception):
    pass


@dataclass(frozen=True)
class MonteCarloConfig:
    n_grid: int = 10  # points per axis on [0, pi/2] x [0, 2 pi / 3]
    n_mc: int = 500
    force_step: float = 0.25  # N
    resolution: float = 0.01  # N, bisection target
    force_cap: float = 300.0  # N
    seed: int = 0
    asperity_low: float = 0.0
    asperity_high: float = np.pi / 2
    percentiles: tuple = (5.0, 50.0)
    keep_samples: bool = False

    def __post_init__(self):
        if self.n_grid < 2 or self.n_mc < 1 or self.force_step <= 0 or self.resolution <= 0:
            raise ValueError("need n_grid >= 2, n_mc >= 1 and positive force step / resolution")
        if self.force_cap < self.force_step:
            raise ValueError("force cap below the first force step")


class PullResult(NamedTuple):
    force: float
    capped: bool


# ----------------------------------------------------------------- simulation

class _Hand:
    """Precomputed per-spine coefficients for one pull direction and a batch of draws."""

    def __init__(self, scn: GraspScenario, unit: np.ndarray, psi: np.ndarray):
        counts = np.array(scn.spine_counts)
        finger = np.repeat(np.arange(3), counts)
        self.offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
        alpha = np.asarray(scn.alpha)[finger]
        fn, ft, fc = unit[finger, 0], unit[finger, 1], unit[finger, 2]
        sp, cp = np.sin(psi), np.cos(psi)
        # per unit pull: normal (den) and in-plane tangential components at each spine
        self.den_f = ft * sp + fn * cp
        self.tan_f = ft * cp - fn * sp
        self.circ_f = np.broadcast_to(fc, psi.shape)
        self.den_p = np.sin(alpha + psi) * scn.f_int
        self.tan_p = np.cos(alpha + psi) * scn.f_int
        self.mu = scn.mu
        # finger level: shear per unit pull, lift-off margin
        self.shear = np.hypot(unit[:, 1], unit[:, 2])
        self.normal = unit[:, 0]
        self.grip_normal = scn.f_int * np.sin(np.asarray(scn.alpha))
        self.f_max = scn.f_max

    def holds(self, F: np.ndarray, rows=slice(None)) -> np.ndarray:
        """Slip test at pull forces F; F broadcasts against the (n, S) spine arrays."""
        den = F * self.den_f[rows] + self.den_p[rows]
        num = np.hypot(F * self.tan_f[rows] + self.tan_p[rows], F * self.circ_f[rows])
        return (den > 0) & (num <= self.mu * den)

    def failed(self, F: np.ndarray, alive: np.ndarray) -> np.ndarray:
        """Grasp failure given the active spines `alive` (..., S) at forces F (...)."""
        k = np.add.reduceat(alive, self.offsets, axis=-1)
        Fe = F[..., None]
        overload = Fe * self.shear > k * self.f_max
        lift = Fe * self.normal + self.grip_normal <= 0
        return np.any((k == 0) | overload | lift, axis=-1)


def simulate_pulls(scn: GraspScenario, unit: np.ndarray, psi: np.ndarray, cfg: MonteCarloConfig):
    """Failure force for each row of asperity draws `psi` (n, S) under the unit contact forces.

    Returns (forces, capped)."""
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    n = psi.shape[0]
    hand = _Hand(scn, unit, psi)
    n_steps = int(np.ceil(cfg.force_cap / cfg.force_step - 1e-9))
    out = np.full(n, float(cfg.force_cap))
    capped = np.ones(n, dtype=bool)
    alive = np.ones(psi.shape, dtype=bool)
    running = np.arange(n)
    lo_force = np.zeros(n)
    step0, block = 1, 16
    while running.size and step0 <= n_steps:
        steps = np.arange(step0, min(step0 + block, n_steps + 1))
        F = steps * cfg.force_step
        rows = running
        hold = hand.holds(F[:, None, None], rows)  # (B, m, S)
        hold[0] &= alive[rows]
        np.logical_and.accumulate(hold, axis=0, out=hold)
        fail = hand.failed(np.broadcast_to(F[:, None], (len(F), len(rows))), hold)  # (B, m)
        hit = fail.any(axis=0)
        first = np.argmax(fail, axis=0)
        # samples failing in this block: bracket [previous step, failing step]
        done = rows[hit]
        if done.size:
            fi = first[hit]
            prev_alive = np.where((fi > 0)[:, None], hold[np.maximum(fi - 1, 0), np.flatnonzero(hit)], alive[done])
            lo = (steps[fi] - 1) * cfg.force_step
            hi = steps[fi] * cfg.force_step
            out[done] = _bisect(hand, done, prev_alive, lo, hi, cfg.resolution)
            capped[done] = False
        alive[rows[~hit]] = hold[-1, ~hit]
        running = rows[~hit]
        step0 = steps[-1] + 1
        block = min(block * 2, 256)
    return out, capped


def _bisect(hand: _Hand, rows, alive, lo, hi, resolution):
    alive = alive.copy()
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    while np.any(hi - lo > resolution):
        mid = 0.5 * (lo + hi)
        trial = alive & hand.holds(mid[:, None], rows)
        bad = hand.failed(mid, trial)
        hi = np.where(bad, mid, hi)
        lo = np.where(bad, lo, mid)
        alive = np.where(bad[:, None], alive, trial)
    return hi


def sample_max_pull(scn: GraspScenario, direction, psi_draw, cfg: Optional[MonteCarloConfig] = None,
                    strict: bool = False) -> PullResult:
    """Failure force for one asperity draw of length sum(n_spines)."""
    cfg = cfg or MonteCarloConfig()
    psi_draw = np.asarray(psi_draw, dtype=float).ravel()
    if psi_draw.size != sum(scn.spine_counts):
        raise ValueError(f"expected {sum(scn.spine_counts)} asperity angles, got {psi_draw.size}")
    beta, phi = (direction.beta, direction.phi) if isinstance(direction, PullDirection) else direction
    unit = unit_contact_forces(scn, beta, phi)
    f, cap = simulate_pulls(scn, unit, psi_draw[None, :], cfg)
    if cap[0] and strict:
        raise NoFailureBelowCap(f"grasp holds up to the {cfg.force_cap} N cap")
    return PullResult(float(f[0]), bool(cap[0]))


# -------------------------------------------------------------------- surface

@dataclass(eq=False)
class LimitSurface:
    beta: np.ndarray  # (nb,)
    phi: np.ndarray  # (np,)
    mean: np.ndarray  # (nb, np)
    std: np.ndarray
    percentiles: dict  # q -> (nb, np)
    n_samples: int
    n_capped: np.ndarray  # (nb, np) int
    force_cap: float
    meta: dict = field(default_factory=dict)
    samples: Optional[np.ndarray] = None  # (nb, np, n) when kept

    def stat(self, which="mean") -> np.ndarray:
        if which == "mean":
            return self.mean
        if which == "std":
            return self.std
        return self.percentiles[float(which)]

    @property
    def capped_fraction(self) -> float:
        return float(self.n_capped.sum()) / (self.n_capped.size * self.n_samples)

    def to_csv(self) -> str:
        qs = sorted(self.percentiles)
        head = ["beta", "phi", "mean", "std"] + [f"p{q:g}" for q in qs] + ["n_fail_cap"]
        lines = [",".join(head)]
        for i, b in enumerate(self.beta):
            for j, p in enumerate(self.phi):
                vals = [b, p, self.mean[i, j], self.std[i, j]] + [self.percentiles[q][i, j] for q in qs]
                lines.append(",".join(repr(float(v)) for v in vals) + f",{int(self.n_capped[i, j])}")
        return "\n".join(lines) + "\n"

    def metadata_json(self) -> str:
        return json.dumps(self.meta, sort_keys=True, indent=2) + "\n"

    def tobytes(self) -> bytes:
        return self.metadata_json().encode() + self.to_csv().encode()


def cell_draws(scn: GraspScenario, cfg: MonteCarloConfig, ib: int, ip: int) -> np.ndarray:
    """Asperity draws (n_mc, S) of cell (ib, ip); seeded by SeedSequence(seed, spawn_key=(ib, ip))."""
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(ib, ip))
    rng = np.random.default_rng(ss)
    return rng.uniform(cfg.asperity_low, cfg.asperity_high, size=(cfg.n_mc, sum(scn.spine_counts)))


def grid_axes(cfg: MonteCarloConfig):
    return np.linspace(0.0, np.pi / 2, cfg.n_grid), np.linspace(0.0, SECTOR, cfg.n_grid)


def _cell(scn, cfg, betas, phis, ib, ip):
    beta, phi = betas[ib], phis[ip]
    key_ip, shift = ip, 0
    if scn.symmetric and phi >= SECTOR:
        # same draws as the equivalent cell one sector back, fingers rotated
        shift = int(np.floor(phi / SECTOR))
        match = np.flatnonzero(phis == phi - shift * SECTOR)
        if match.size:
            key_ip = int(match[0])
        else:
            shift = 0
    psi = cell_draws(scn, cfg, ib, key_ip)
    if shift:
        psi = np.roll(psi, (shift % 3) * scn.spine_counts[0], axis=1)
    unit = unit_contact_forces(scn, beta, phi)
    return simulate_pulls(scn, unit, psi, cfg)


def build_limit_surface(scn: GraspScenario, cfg: MonteCarloConfig = MonteCarloConfig(), threads: int = 1) -> LimitSurface:
    betas, phis = grid_axes(cfg)
    cells = [(i, j) for i in range(len(betas)) for j in range(len(phis))]

    def work(c):
        return _cell(scn, cfg, betas, phis, *c)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]

    shape = (len(betas), len(phis))
    forces = np.empty(shape + (cfg.n_mc,))
    n_capped = np.zeros(shape, dtype=int)
    for (i, j), (f, cap) in zip(cells, results):
        forces[i, j] = f
        n_capped[i, j] = int(cap.sum())
    qs = tuple(float(q) for q in cfg.percentiles)
    meta = {"scenario": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(scn).items()},
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()}}
    return LimitSurface(
        beta=betas, phi=phis,
        mean=forces.mean(axis=-1),
        std=forces.std(axis=-1),
        percentiles={q: np.percentile(forces, q, axis=-1) for q in qs},
        n_samples=cfg.n_mc, n_capped=n_capped, force_cap=cfg.force_cap, meta=meta,
        samples=forces if cfg.keep_samples else None,
    )


# --------------------------------------------------------------------- lookup

def canonical_direction(beta: float, phi: float):
    """Map any pull direction onto beta in [0, pi/2], phi in [0, 2 pi / 3)."""
    if beta < 0:
        beta, phi = -beta, phi + np.pi
    beta = min(beta, np.pi / 2)
    return beta, float(np.mod(phi, SECTOR))


def _bracket(axis, v):
    i = int(np.clip(np.searchsorted(axis, v, side="right") - 1, 0, len(axis) - 2))
    t = (v - axis[i]) / (axis[i + 1] - axis[i])
    return i, float(np.clip(t, 0.0, 1.0))


def query(ls: LimitSurface, direction, percentile="mean") -> float:
    """Bilinear lookup of a surface statistic ('mean', 'std' or a stored percentile)."""
    beta, phi = (direction.beta, direction.phi) if isinstance(direction, PullDirection) else direction
    beta, phi = canonical_direction(float(beta), float(phi))
    Z = ls.stat(percentile)
    i, u = _bracket(ls.beta, beta)
    j, v = _bracket(ls.phi, phi)
    if u == 0.0 and v == 0.0:
        return float(Z[i, j])
    return float((1 - u) * (1 - v) * Z[i, j] + u * (1 - v) * Z[i + 1, j]
                 + (1 - u) * v * Z[i, j + 1] + u * v * Z[i + 1, j + 1])


def cross_section(ls: LimitSurface, phi0: float = 0.0, n: int = 181, percentile="mean"):
    """Polar slice through the plane containing the wrist axis at azimuth phi0.

    Returns (beta, force) with beta from -90 to 90 deg; negative beta lies in the phi0 + pi half-plane."""
    betas = np.linspace(-np.pi / 2, np.pi / 2, n)
    forces = np.array([query(ls, (b, phi0), percentile) for b in betas])
    return betas, forces
