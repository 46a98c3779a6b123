"""Scenario files: YAML, validated against a versioned JSON schema, then turned into
model objects. Angles in scenario files are in degrees, lengths in metres."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
import yaml

from .feasibility import Stance
from .footstep import GoalRegion, PlannerConfig
from .grasp import GraspScenario
from .limit_surface import MonteCarloConfig
from .mesh import TriMesh, hemisphere_mesh, ledge_mesh, load_mesh, plate_mesh
from .model import ActuationLimits, Anchor, BodyPose, Environment, JointLimits, Protrusion, RobotModel, Tunnel
from .perception import MsacConfig
from .scenarios import random_corridor, tunnel_scenario
from .scp import ScpConfig

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    pass


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_quat = {"type": "array", "items": _num, "minItems": 4, "maxItems": 4}
_pose = _obj({"position": _vec3, "orientation": _quat}, ["position"])

SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "name": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "robot": _obj({
        "body_length": _pos, "body_diameter": _pos, "mass_body": _pos, "mass_gripper": {"type": "number", "minimum": 0},
        "gravity": {"type": "number", "minimum": 0}, "min_tension": {"type": "number", "minimum": 0},
        "force_range": _pair, "moment_range": _pair, "extension_range": _pair, "tilt_range_deg": _pair,
        "collision_margin": {"type": "number", "minimum": 0},
    }),
    "environment": _obj({
        "tunnel_radius": _pos,
        "anchors": {"type": "array", "items": _obj({"id": {"type": "string"}, "position": _vec3}, ["id", "position"])},
        "protrusions": {"type": "array", "items": _obj({"center": _vec3, "radius": _pos}, ["center", "radius"])},
        "corridor": _obj({"seed": _int, "n_anchors": {"type": "integer", "minimum": 8, "maximum": 12},
                          "goal_x": _num, "goal_radius": _pos}),
        "mesh": {"type": "string"},
    }),
    "start": _obj({"anchors": {"type": "array", "items": {"type": "string"}, "minItems": 8, "maxItems": 8},
                   "pose": _pose}),
    "goal": _obj({"center": _vec3, "radius": _pos}, ["center", "radius"]),
    "grasp": _obj({
        "alpha_deg": {"oneOf": [_num, _vec3]}, "rock_radius": _pos, "wrist_offset": _num, "link_length": _pos,
        "mu": _pos, "k_n": _pos, "k_t": _pos, "k_c": _pos,
        "n_spines": {"oneOf": [{"type": "integer", "minimum": 1},
                               {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3}]},
        "f_int": {"type": "number", "minimum": 0}, "f_max": _pos,
        "f_int_values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    }),
    "monte_carlo": _obj({
        "n_grid": {"type": "integer", "minimum": 2}, "n_mc": {"type": "integer", "minimum": 1},
        "force_step": _pos, "resolution": _pos, "force_cap": _pos,
        "percentiles": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 100}},
        "cross_section_phi_deg": {"type": "array", "items": _num},
    }),
    "planner": _obj({"n_pose": {"type": "integer", "minimum": 0}, "sigma_position": {"type": "number", "minimum": 0},
                     "sigma_angle_deg": {"type": "number", "minimum": 0}, "cost": {"enum": ["transitions", "travel"]},
                     "max_expansions": {"type": "integer", "minimum": 1}}),
    "scp": _obj({"lambda_state": _pos, "lambda_control": _pos, "max_iterations": {"type": "integer", "minimum": 1},
                 "tolerance": _pos, "defect_tolerance": _pos, "dt": _pos, "step": _pos, "seed_budget": {"type": "integer", "minimum": 0},
                 "enabled": {"type": "boolean"}}),
    "perception": _obj({
        "cloud": {"type": "string"}, "format": {"enum": ["ascii-ply", "xyz-csv"]},
        "voxel": _pos, "d_max": _pos, "iterations": {"type": "integer", "minimum": 1},
        "r_window": _pair, "min_inliers": {"type": "integer", "minimum": 4}, "max_models": {"type": "integer", "minimum": 1},
        "knn_count": {"type": "integer", "minimum": 3}, "alpha_window_deg": _pair,
        "gripper_axis": _vec3, "viewpoint": _vec3, "preferred_direction_deg": _pair, "percentile": {"type": "number"},
    }),
    "reach": _obj({
        "mesh": {"type": "string"}, "builtin": {"enum": ["hemisphere", "ledge", "plate"]},
        "target": _vec3, "standoff": _pos, "attack_window_deg": _pair,
    }),
}, ["schema_version"])


@dataclass
class Scenario:
    data: dict
    text: str
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def section(self, name) -> dict:
        return dict(self.data.get(name) or {})

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    # -- builders
    def robot(self) -> RobotModel:
        r = self.section("robot")
        model = RobotModel()
        lim = model.joint_limits
        joints = JointLimits(lim.pan_range,
                             tuple(np.radians(r["tilt_range_deg"])) if "tilt_range_deg" in r else lim.tilt_range,
                             tuple(r.get("extension_range", lim.extension_range)))
        act = ActuationLimits(tuple(r.get("force_range", model.actuation_limits.prismatic_force_range)),
                              tuple(r.get("moment_range", model.actuation_limits.moment_range)))
        keep = {k: r[k] for k in ("body_length", "body_diameter", "mass_body", "mass_gripper", "gravity",
                                  "min_tension", "collision_margin") if k in r}
        return RobotModel(**keep, joint_limits=joints, actuation_limits=act)

    def environment(self):
        """(env, start stance or None, goal or None)."""
        e = self.section("environment")
        goal = None
        if "corridor" in e:
            c = e["corridor"]
            env, start, goal = random_corridor(c.get("seed", 0), c.get("n_anchors", 12),
                                               radius=e.get("tunnel_radius", 2.0),
                                               goal_x=c.get("goal_x", 0.45), goal_radius=c.get("goal_radius", 0.2))
        else:
            radius = e.get("tunnel_radius", 2.0)
            prot = [Protrusion(np.array(p["center"], float), p["radius"]) for p in e.get("protrusions", [])]
            extra = [Anchor(a["id"], np.array(a["position"], float)) for a in e.get("anchors", [])]
            if "start" in self.data and "anchors" in self.data["start"]:
                env = Environment(extra, Tunnel(radius, protrusions=tuple(prot)))
                start = None
            else:
                env, start = tunnel_scenario(radius, extra, prot)
        if "start" in self.data:
            s = self.data["start"]
            anchors = tuple(s.get("anchors", start.anchors if start else ()))
            missing = [a for a in anchors if a not in env.anchors]
            if missing:
                raise ScenarioError(f"start references unknown anchors {missing}")
            pose = start.pose if start is not None else BodyPose.at(0.0)
            if "pose" in s:
                pose = _pose_of(s["pose"])
            start = Stance(anchors, pose)
        if "goal" in self.data:
            g = self.data["goal"]
            goal = GoalRegion(tuple(g["center"]), g["radius"])
        return env, start, goal

    def grasp(self, f_int: Optional[float] = None) -> GraspScenario:
        g = self.section("grasp")
        alpha = np.radians(g.get("alpha_deg", 38.6))
        kw = {k: g[k] for k in ("link_length", "mu", "k_n", "k_t", "k_c", "f_max") if k in g}
        if "n_spines" in g:
            n = g["n_spines"]
            kw["n_spines"] = tuple(n) if isinstance(n, list) else n
        return GraspScenario(alpha=tuple(np.broadcast_to(alpha, (3,)).tolist()),
                             rock_radius=g.get("rock_radius", 0.116), wrist_offset=g.get("wrist_offset", 0.045),
                             f_int=g.get("f_int", 6.0) if f_int is None else f_int, **kw)

    def f_int_values(self) -> list:
        g = self.section("grasp")
        return list(g.get("f_int_values", [g.get("f_int", 6.0)]))

    def monte_carlo(self, seed: int) -> MonteCarloConfig:
        m = self.section("monte_carlo")
        kw = {k: m[k] for k in ("n_grid", "n_mc", "force_step", "resolution", "force_cap") if k in m}
        if "percentiles" in m:
            kw["percentiles"] = tuple(float(p) for p in m["percentiles"])
        return MonteCarloConfig(seed=seed, **kw)

    def cross_sections(self) -> list:
        return list(self.section("monte_carlo").get("cross_section_phi_deg", [0.0]))

    def planner(self, seed: int) -> PlannerConfig:
        p = self.section("planner")
        kw = {k: p[k] for k in ("n_pose", "sigma_position", "cost", "max_expansions") if k in p}
        if "sigma_angle_deg" in p:
            kw["sigma_angle"] = float(np.radians(p["sigma_angle_deg"]))
        return PlannerConfig(seed=seed, **kw)

    def scp(self, seed: int) -> ScpConfig:
        s = self.section("scp")
        kw = {k: s[k] for k in ("lambda_state", "lambda_control", "max_iterations", "tolerance", "defect_tolerance",
                                "dt", "step", "seed_budget") if k in s}
        return ScpConfig(seed=seed, **kw)

    def scp_enabled(self) -> bool:
        return bool(self.section("scp").get("enabled", True))

    def msac(self, seed: int) -> MsacConfig:
        p = self.section("perception")
        kw = {k: p[k] for k in ("d_max", "iterations", "min_inliers", "max_models") if k in p}
        if "r_window" in p:
            kw["r_min"], kw["r_max"] = p["r_window"]
        return MsacConfig(seed=seed, **kw)

    def mesh(self, override: Optional[str] = None) -> TriMesh:
        r = self.section("reach")
        if override is not None:
            return load_mesh(override)
        if "mesh" in r:
            return load_mesh(self.path(r["mesh"]))
        if "mesh" in self.section("environment"):
            return load_mesh(self.path(self.section("environment")["mesh"]))
        return {"hemisphere": lambda: hemisphere_mesh(0.12), "ledge": ledge_mesh,
                "plate": lambda: plate_mesh(0.3, 30)}[r.get("builtin", "hemisphere")]()


def _pose_of(p) -> BodyPose:
    return BodyPose(np.array(p["position"], float), np.array(p.get("orientation", [0, 0, 0, 1]), float))


def parse_scenario(text: str, base_dir=None) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}") from exc
    scn = Scenario(data, text, Path(base_dir) if base_dir is not None else Path.cwd())
    for sec, key in (("environment", "mesh"), ("perception", "cloud"), ("reach", "mesh")):
        rel = scn.section(sec).get(key)
        if rel is not None and not scn.path(rel).exists():
            raise ScenarioError(f"{sec}.{key}: file {rel} does not exist")
    return scn


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(text, path.parent)
