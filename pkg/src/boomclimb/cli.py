"""Command-line front end.

Subcommands ``limit-surface``, ``plan``, ``perceive`` and ``reach`` read a YAML scenario,
write CSV/JSON results into an output directory and finish with ``manifest.json``.
Exit codes: 0 ok, 2 bad input, 3 compute error, 4 no footstep path, 5 SCP not converged.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .footstep import NoFeasiblePose, NoPath, build_stance_graph, plan_footsteps
from .limit_surface import NoFailureBelowCap, build_limit_surface, cross_section
from .mesh import MeshFormatError
from .motion import plan_motion
from .perception import (Degenerate, DegenerateNeighborhood, EmptyCloud, GraspSite, ParseError, alpha_map,
                         estimate_normals, find_sphere_candidates, load_point_cloud, rank_grasp_sites, sphere_alpha,
                         voxel_downsample)
from .reachability import base_pose_for, cases_csv, compare_cases
from .scenario import ScenarioError, load_scenario, parse_scenario
from .scp import NotConverged, SeedFailed, SubproblemInfeasible
from .tension import Infeasible

OUT_ENV = "BOOMCLIMB_OUT"
EXIT_OK, EXIT_INPUT, EXIT_COMPUTE, EXIT_NO_PATH, EXIT_NOT_CONVERGED = 0, 2, 3, 4, 5


class _Output:
    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self.files = {}

    def write(self, name: str, text: str):
        data = text.encode()
        (self.root / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def json(self, name: str, obj):
        self.write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sha_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(v: float) -> str:
    return f"{v:g}".replace(".", "p").replace("-", "m")


# ----------------------------------------------------------------- commands

def cmd_limit_surface(scn, out: _Output, seed: int, threads: int, args) -> int:
    cfg = scn.monte_carlo(seed)
    summary = []
    for f_int in scn.f_int_values():
        ls = build_limit_surface(scn.grasp(f_int), cfg, threads=threads)
        tag = f"fint{_fmt(f_int)}"
        out.write(f"surface_{tag}.csv", ls.to_csv())
        out.write(f"surface_{tag}.json", ls.metadata_json())
        for phi in scn.cross_sections():
            beta, val = cross_section(ls, np.radians(phi))
            rows = ["beta_deg,force"] + [f"{float(np.degrees(b))!r},{float(v)!r}" for b, v in zip(beta, val)]
            out.write(f"cross_section_{tag}_phi{_fmt(phi)}.csv", "\n".join(rows) + "\n")
        summary.append({"f_int": f_int, "mean_max": float(ls.mean.max()), "mean_min": float(ls.mean.min()),
                        "capped_fraction": ls.capped_fraction})
    out.json("summary.json", summary)
    return EXIT_OK


def _plan_json(plan) -> dict:
    return {
        "cost": plan.cost,
        "stances": [list(s.anchors) for s in plan.stances],
        "transitions": [{"boom": t.boom, "from": t.source.anchors[t.boom], "to": t.target.anchors[t.boom],
                         "pose": {"position": t.pose.position.tolist(), "orientation": t.pose.orientation.tolist()}}
                        for t in plan.transitions],
    }


def cmd_plan(scn, out: _Output, seed: int, threads: int, args) -> int:
    env, start, goal = scn.environment()
    if start is None or goal is None:
        raise ScenarioError("plan needs a start stance and a goal region")
    model = scn.robot()
    graph = build_stance_graph(env, model, start, goal, scn.planner(seed))
    try:
        plan = plan_footsteps(graph)
    except NoPath as exc:
        out.json("plan.json", {"error": str(exc), "expanded_stances": len(graph._rep)})
        raise
    out.json("plan.json", _plan_json(plan))
    if not scn.scp_enabled():
        return EXIT_OK
    cfg = scn.scp(seed)
    status = EXIT_OK
    try:
        trajs = plan_motion(plan, env, model, cfg)
    except NotConverged as exc:
        trajs = [exc.best]
        status = EXIT_NOT_CONVERGED
    diag = []
    for i, tr in enumerate(trajs):
        name = f"traj_{i:02d}_{tr.phase}"
        out.write(name + ".csv", tr.to_csv())
        d = {k: v for k, v in tr.diagnostics.items() if k != "wall_time"}
        diag.append({"file": name + ".csv", "moved_boom": tr.moved_boom, **d})
    out.json("trajectories.json", diag)
    return status


def cmd_perceive(scn, out: _Output, seed: int, threads: int, args) -> int:
    p = scn.section("perception")
    path = args.cloud or (scn.path(p["cloud"]) if "cloud" in p else None)
    if path is None:
        raise ScenarioError("no point cloud given")
    pc = load_point_cloud(path, p.get("format"))
    voxel = p.get("voxel", 0.005)
    cands = find_sphere_candidates(pc, voxel, scn.msac(seed))
    out.json("candidates.json", [{"id": f"s{i}", "center": list(c.center), "radius": c.radius,
                                  "inliers": c.inliers, "inlier_fraction": c.inlier_fraction}
                                 for i, c in enumerate(cands)])
    down = voxel_downsample(pc, voxel)
    axis = np.asarray(p.get("gripper_axis", [0.0, 0.0, 1.0]), float)
    lo, hi = np.radians(p.get("alpha_window_deg", [25.0, 85.0]))
    knn = min(p.get("knn_count", 30), len(down))
    normals = estimate_normals(down, knn, p.get("viewpoint", [0.0, 0.0, 0.0]))
    amap = alpha_map(down, normals, axis / np.linalg.norm(axis), lo, hi)
    out.write("alpha_map.csv", amap.to_csv(down.points))
    d_max = scn.msac(seed).d_max
    sites = []
    for i, c in enumerate(cands):
        near = np.abs(np.linalg.norm(down.points - np.asarray(c.center), axis=1) - c.radius) <= d_max
        sub = type(amap)(amap.alpha[near], amap.graspable[near], amap.axis, amap.alpha_min, amap.alpha_max)
        alpha = sphere_alpha(c, scn.grasp().link_length)
        grasp = scn.grasp().with_(alpha=(alpha,) * 3, rock_radius=c.radius)
        ls = build_limit_surface(grasp, scn.monte_carlo(seed), threads=threads)
        sites.append(GraspSite(f"s{i}", ls, sub, {"alpha": alpha}))
    beta, phi = np.radians(p.get("preferred_direction_deg", [0.0, 0.0]))
    ranked = rank_grasp_sites(sites, (beta, phi), p.get("percentile", 5.0))
    info = {s.id: s.info for s in sites}
    out.json("sites.json", [{"id": i, "score": s, "alpha": info[i]["alpha"]} for i, s in ranked])
    return EXIT_OK


def cmd_reach(scn, out: _Output, seed: int, threads: int, args) -> int:
    r = scn.section("reach")
    mesh = scn.mesh(args.mesh)
    if len(mesh) == 0:
        results = []
        out.write("reach_cases.csv", "case,area_m2,faces\n" + "".join(f"{k},0.0,0\n" for k in range(1, 6)))
        out.json("reach_faces.json", {str(k): [] for k in range(1, 6)})
        return EXIT_OK
    target = r.get("target")
    if target is None:
        # highest point of the mesh
        target = mesh.centroids[np.argmax(mesh.centroids[:, 2])]
    pose = base_pose_for(mesh, target, r.get("standoff", 0.02))
    results = compare_cases(mesh, pose, window=tuple(r.get("attack_window_deg", [10.0, 30.0])))
    out.write("reach_cases.csv", cases_csv(results))
    out.json("reach_faces.json", {str(res.case_id): res.faces.tolist() for res in results})
    return EXIT_OK


COMMANDS = {"limit-surface": cmd_limit_surface, "plan": cmd_plan, "perceive": cmd_perceive, "reach": cmd_reach}


# ----------------------------------------------------------------- driver

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boomclimb", description="Grasp, planning, perception and reachability tools.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "perceive":
            p.add_argument("cloud", nargs="?", help="point cloud (.ply or .csv)")
        if name == "reach":
            p.add_argument("mesh", nargs="?", help="mesh (.stl or .obj)")
        p.add_argument("--scenario", help="scenario YAML")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command> or runs/<command>)")
        p.add_argument("--seed", type=int, help="overrides the scenario seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--from-manifest", help="rerun exactly as recorded in a manifest.json")
    return ap


def _resolve(args):
    """Scenario, seed, threads and positional input, either from flags or from a manifest."""
    if args.from_manifest:
        man = json.loads(Path(args.from_manifest).read_text())
        if man.get("command") != args.command:
            raise ScenarioError(f"manifest was written by '{man.get('command')}', not '{args.command}'")
        scn = parse_scenario(man["scenario_text"], man.get("scenario_dir"))
        if scn.sha256 != man["scenario_sha256"]:
            raise ScenarioError("scenario text does not match the manifest hash")
        for key in ("cloud", "mesh"):
            if hasattr(args, key) and getattr(args, key) is None:
                setattr(args, key, man.get("inputs", {}).get(key, {}).get("path"))
        return scn, man["seed"], man.get("threads", 1)
    if not args.scenario:
        raise ScenarioError("--scenario or --from-manifest is required")
    scn = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else int(scn.data.get("seed", 0))
    return scn, seed, args.threads


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    out_dir = args.out or str(Path(os.environ.get(OUT_ENV, "runs")) / args.command)
    try:
        scn, seed, threads = _resolve(args)
    except (ScenarioError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _Output(Path(out_dir))
    try:
        code = COMMANDS[args.command](scn, out, seed, threads, args)
    except (ScenarioError, ParseError, EmptyCloud, MeshFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    except NoPath as exc:
        print(f"no path: {exc}", file=sys.stderr)
        code = EXIT_NO_PATH
    except (NoFeasiblePose, SeedFailed, SubproblemInfeasible, Infeasible, Degenerate, DegenerateNeighborhood,
            NoFailureBelowCap, ValueError, np.linalg.LinAlgError) as exc:
        print(f"compute error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_COMPUTE
    inputs = {}
    for key in ("cloud", "mesh"):
        val = getattr(args, key, None)
        if val is not None:
            inputs[key] = {"path": str(Path(val).resolve()), "sha256": _sha_file(val)}
    manifest = {
        "tool": "boomclimb",
        "version": __version__,
        "command": args.command,
        "scenario_sha256": scn.sha256,
        "scenario_text": scn.text,
        "scenario_dir": str(scn.base_dir.resolve()),
        "seed": seed,
        "threads": threads,
        "inputs": inputs,
        "exit_code": code,
        "outputs": dict(sorted(out.files.items())),
        "wall_time_s": time.perf_counter() - t0,
    }
    (Path(out_dir) / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
