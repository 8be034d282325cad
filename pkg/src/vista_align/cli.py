"""Command line interface: simulate, build-map, submaps, match, evaluate."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import alignment, evaluation, formats, simulation, submap, triangulation
from .core import CameraIntrinsics, Hyperparameters, InputError, transform_angles


def _log_json(enabled, stage, **fields):
    if enabled:
        print(json.dumps({"stage": stage, **fields}, sort_keys=True))


def _load_params(path):
    if path is None:
        return Hyperparameters()
    return formats.load_config(path)


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("VISTA_ALIGN_THREADS")
    return max(1, int(env)) if env else 1


def _read_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError("%s file is not valid JSON: %s" % (what, exc)) from exc


def _scene_spec(path, seed_override):
    data = _read_json(path, "scene spec")
    try:
        return simulation.SceneSpec(
            n_objects=data["n_objects"],
            extent=data["extent"],
            n_dynamic=data.get("n_dynamic", 0),
            dynamic_velocity=data.get("dynamic_velocity", 0.0),
            seed=seed_override if seed_override is not None else data.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError("invalid scene spec: %s" % exc) from exc


def _trajectory_spec(path):
    data = _read_json(path, "trajectory spec")
    try:
        spec = simulation.TrajectorySpec(
            waypoints=data["waypoints"],
            frames=data["frames"],
            camera_pitch=data.get("camera_pitch", 0.0),
            altitude=data.get("altitude", 10.0))
        intr = data["intrinsics"]
        intrinsics = CameraIntrinsics(fx=intr["fx"], fy=intr["fy"], cx=intr["cx"],
                                      cy=intr["cy"], width=intr["width"],
                                      height=intr["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError("invalid trajectory spec: %s" % exc) from exc
    return spec, intrinsics


def cmd_simulate(args):
    scene_spec = _scene_spec(args.scene, args.seed)
    trajectory, intrinsics = _trajectory_spec(args.trajectory)
    t0 = time.perf_counter()
    scene = simulation.generate_scene(scene_spec)
    tracks, poses = simulation.render_tracks(
        scene, trajectory, intrinsics, noise=args.noise, dropout=args.dropout,
        duplicate_rate=args.duplicate_rate, seed=scene_spec.seed + 1)
    os.makedirs(args.out, exist_ok=True)
    formats.save_track_file(os.path.join(args.out, "tracks.json"),
                            intrinsics, poses, tracks)
    truth = [{"id": i,
              "position": [float(v) for v in obj.position],
              "velocity": [float(v) for v in obj.velocity],
              "dynamic": bool(obj.dynamic)} for i, obj in enumerate(scene)]
    formats.atomic_write(os.path.join(args.out, "ground_truth.json"),
                         json.dumps({"objects": truth}, separators=(",", ":")))
    _log_json(args.log_json, "simulate", n_objects=len(scene),
              n_tracks=len(tracks), n_frames=trajectory.frames,
              seconds=time.perf_counter() - t0)
    return 0


def cmd_build_map(args):
    params = _load_params(args.config)
    intrinsics, poses, tracks = formats.load_track_file(args.tracks)
    t0 = time.perf_counter()
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        obj_map, stats = triangulation.build_map(tracks, poses, intrinsics,
                                                 params, args.agent_id)
    formats.save_map(obj_map, args.out)
    print("landmarks=%d discarded_diverged=%d discarded_short=%d"
          % (stats.n_landmarks, stats.n_discarded_diverged,
             stats.n_discarded_short))
    _log_json(args.log_json, "build-map", landmarks=stats.n_landmarks,
              discarded_diverged=stats.n_discarded_diverged,
              discarded_short=stats.n_discarded_short,
              seconds=time.perf_counter() - t0)
    return 0


def cmd_submaps(args):
    params = _load_params(args.config)
    obj_map = formats.load_map(args.map)
    t0 = time.perf_counter()
    filtered = submap.mahalanobis_filter(obj_map, params.omega_percentile) \
        if len(obj_map) >= 2 else obj_map
    submaps = submap.generate_submaps(filtered, params)
    os.makedirs(args.out, exist_ok=True)
    names = []
    for i, sm in enumerate(submaps):
        name = "submap_%04d.json" % i
        formats.atomic_write(os.path.join(args.out, name),
                             submap.submap_to_json(sm))
        names.append(name)
    formats.atomic_write(os.path.join(args.out, "index.json"),
                         json.dumps({"agent_id": obj_map.agent_id,
                                     "n_submaps": len(names),
                                     "submaps": names}, separators=(",", ":")))
    _log_json(args.log_json, "submaps", n_submaps=len(submaps),
              n_inliers=len(filtered), n_landmarks=len(obj_map),
              seconds=time.perf_counter() - t0)
    return 0


def _hypothesis_record(h):
    roll, pitch, yaw = transform_angles(h.transform)
    return {"rotation": [float(v) for v in h.transform.rotation.ravel()],
            "translation": [float(v) for v in h.transform.translation],
            "cardinality": h.cardinality,
            "source_submap": h.source_submap,
            "target_submap": h.target_submap,
            "roll": roll, "pitch": pitch, "yaw": yaw}


def cmd_match(args):
    params = _load_params(args.config)
    map_a = formats.load_map(args.map_a)
    map_b = formats.load_map(args.map_b)
    t0 = time.perf_counter()
    fa = submap.mahalanobis_filter(map_a, params.omega_percentile) \
        if len(map_a) >= 2 else map_a
    fb = submap.mahalanobis_filter(map_b, params.omega_percentile) \
        if len(map_b) >= 2 else map_b
    hypotheses = alignment.align_maps(fa, fb, params, threads=_threads(args))
    if args.top_k is not None:
        hypotheses = hypotheses[:args.top_k]
    formats.atomic_write(args.out, json.dumps(
        [_hypothesis_record(h) for h in hypotheses], separators=(",", ":")))
    _log_json(args.log_json, "match", n_hypotheses=len(hypotheses),
              seconds=time.perf_counter() - t0)
    return 0 if hypotheses else 2


def _parse_sweep(text):
    try:
        lo, _, hi = text.partition(":")
        lo, hi = int(lo), int(hi)
    except ValueError as exc:
        raise InputError("sweep must be 'lo:hi', got %r" % text) from exc
    if hi < lo:
        raise InputError("sweep must be 'lo:hi' with hi >= lo")
    return list(range(lo, hi + 1))


def cmd_evaluate(args):
    params = _load_params(args.config)
    map_a = formats.load_map(args.map_a)
    map_b = formats.load_map(args.map_b)
    truth = formats.load_transform(args.truth)
    sweep = _parse_sweep(args.sweep)
    t0 = time.perf_counter()
    outcomes = evaluation.evaluate_map_pair(map_a, map_b, truth, params,
                                            voxel=args.voxel)
    rows = evaluation.precision_recall(outcomes, params, sweep)
    mean_rt, std_rt = evaluation.timing(map_a, map_b, params, args.repeats)
    lines = ["s_max,precision,recall,hypothesized,overlapping_pairs,"
             "mean_runtime_s,std_runtime_s"]
    for r in rows:
        lines.append("%d,%.6f,%.6f,%d,%d,%.6f,%.6f"
                     % (r.s_max, r.precision, r.recall, r.n_hypothesized,
                        r.n_overlapping, mean_rt, std_rt))
    formats.atomic_write(args.out, "\n".join(lines) + "\n")
    _log_json(args.log_json, "evaluate", n_pairs=len(outcomes),
              sweep=[sweep[0], sweep[-1]], seconds=time.perf_counter() - t0)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value hyperparameter file")
    common.add_argument("--seed", type=int, help="global random seed override")
    common.add_argument("--log-json", action="store_true",
                        help="emit one JSON object per pipeline stage")
    common.add_argument("--threads", type=int,
                        help="max parallel submap-pair solves "
                             "(default: $VISTA_ALIGN_THREADS or 1)")

    parser = argparse.ArgumentParser(
        prog="vista-align",
        description="Sparse object-map building, submap matching, and "
                    "frame-alignment evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="generate synthetic tracks + poses + ground truth")
    p.add_argument("--scene", required=True, help="scene spec JSON")
    p.add_argument("--trajectory", required=True,
                   help="trajectory spec JSON (includes intrinsics)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--noise", type=float, default=0.0, help="pixel noise sigma, px")
    p.add_argument("--dropout", type=float, default=0.0,
                   help="per-detection dropout probability")
    p.add_argument("--duplicate-rate", type=float, default=0.0,
                   help="per-object track-split probability")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-map", parents=[common],
                       help="triangulate a track file into an object map")
    p.add_argument("--tracks", required=True, help="track file JSON")
    p.add_argument("--out", required=True, help="output map JSON")
    p.add_argument("--agent-id", default="agent", help="agent id for the map")
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("submaps", parents=[common],
                       help="filter inliers and write the submap grid")
    p.add_argument("--map", required=True, help="object map JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_submaps)

    p = sub.add_parser("match", parents=[common],
                       help="all-to-all submap matching between two maps")
    p.add_argument("--map-a", required=True, help="source object map JSON")
    p.add_argument("--map-b", required=True, help="target object map JSON")
    p.add_argument("--out", required=True, help="output hypothesis list JSON")
    p.add_argument("--top-k", type=int, help="truncate to the top-k hypotheses")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", parents=[common],
                       help="precision/recall sweep against a known alignment")
    p.add_argument("--map-a", required=True, help="source object map JSON")
    p.add_argument("--map-b", required=True, help="target object map JSON")
    p.add_argument("--truth", required=True,
                   help="ground-truth transform JSON (map-a frame -> map-b frame)")
    p.add_argument("--sweep", default="3:15", help="s_max sweep as lo:hi")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--voxel", type=float, help="IoU voxel size, m (default w/4)")
    p.add_argument("--repeats", type=int, default=3,
                   help="timing repeats per submap pair (>= 3)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
