"""Evaluation protocol: voxel IoU overlap gating, correctness classification
against a known frame alignment, precision/recall sweeps over the cardinality
gate, and per-comparison runtime measurement."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .alignment import solve_submap_pair
from .core import transform_angles
from .submap import Submap, generate_submaps, mahalanobis_filter


def default_voxel(params):
    """Default IoU voxel resolution: a quarter of the submap window."""
    return params.window / 4.0


def _voxel_cells(points, voxel):
    return {tuple(c) for c in np.floor(np.asarray(points) / voxel).astype(np.int64)}


def submap_iou(submap_a, submap_b, voxel):
    """Voxel-occupancy IoU of two submaps expressed in a common frame."""
    if voxel <= 0:
        raise ValueError("voxel must be positive")
    if len(submap_a) == 0 or len(submap_b) == 0:
        return 0.0
    cells_a = _voxel_cells(submap_a.points, voxel)
    cells_b = _voxel_cells(submap_b.points, voxel)
    return len(cells_a & cells_b) / len(cells_a | cells_b)


def classify(hypothesis, truth, params):
    """True when the hypothesis residual against the ground-truth alignment
    passes the roll/pitch, yaw, and translation gates (all strict <)."""
    transform = getattr(hypothesis, "transform", hypothesis)
    residual = transform.compose(truth.inverse())
    roll, pitch, yaw = transform_angles(residual)
    return (abs(roll) < params.theta_rp and abs(pitch) < params.theta_rp
            and abs(yaw) < params.theta_yaw
            and float(np.linalg.norm(residual.translation)) < params.t_max)


@dataclass(frozen=True)
class PairOutcome:
    """Result of one submap-pair comparison, ready for PR aggregation."""

    iou: float
    cardinality: int       # 0 when no transform was estimable
    attitude_ok: bool      # survived the roll/pitch pruning gate
    correct: bool          # classification of the transform vs ground truth


@dataclass(frozen=True)
class PrPoint:
    s_max: int
    precision: float
    recall: float
    n_hypothesized: int
    n_overlapping: int
    precision_defined: bool


def precision_recall(outcomes, params, s_max_sweep):
    """PR table over the cardinality-gate sweep.

    Hypothesized = attitude-surviving outcomes with |S| > s_max. Precision is
    reported as 1.0 (flagged undefined) when nothing is hypothesized.
    """
    overlapping = [o for o in outcomes if o.iou > params.theta_overlap]
    rows = []
    for s_max in s_max_sweep:
        hyp = [o for o in outcomes if o.attitude_ok and o.cardinality > s_max]
        n_correct = sum(o.correct for o in hyp)
        defined = len(hyp) > 0
        precision = n_correct / len(hyp) if defined else 1.0
        n_recalled = sum(o.correct for o in hyp if o.iou > params.theta_overlap)
        recall = n_recalled / len(overlapping) if overlapping else 0.0
        rows.append(PrPoint(s_max, precision, recall, len(hyp),
                            len(overlapping), defined))
    return rows


def evaluate_map_pair(map_a, map_b, truth, params, voxel=None,
                      filter_inliers=True, max_candidates=None):
    """Run the full correspondence search over every submap pair and collect
    per-pair outcomes for PR aggregation.

    `truth` maps map-A-frame coordinates into map-B-frame coordinates; IoU is
    computed after pulling map B's submaps back into map A's frame.
    """
    if voxel is None:
        voxel = default_voxel(params)
    fa = mahalanobis_filter(map_a, params.omega_percentile) if (
        filter_inliers and len(map_a) >= 2) else map_a
    fb = mahalanobis_filter(map_b, params.omega_percentile) if (
        filter_inliers and len(map_b) >= 2) else map_b
    subs_a = generate_submaps(fa, params)
    subs_b = generate_submaps(fb, params)
    truth_inv = truth.inverse()

    solve_cache, iou_cache = {}, {}
    outcomes = []
    for sa in subs_a:
        for sb in subs_b:
            key = (sa.landmark_ids, sb.landmark_ids)
            if key not in solve_cache:
                res = solve_submap_pair(sa, sb, params, max_candidates=max_candidates)
                if res is None:
                    solve_cache[key] = (0, False, False)
                else:
                    transform, inliers = res
                    roll, pitch, _ = transform_angles(transform)
                    attitude_ok = (abs(roll) <= params.theta_rp
                                   and abs(pitch) <= params.theta_rp)
                    solve_cache[key] = (len(inliers), attitude_ok,
                                        classify(transform, truth, params))
                iou_cache[key] = submap_iou(
                    sa, Submap(sb.center, sb.landmark_ids,
                               truth_inv.apply(sb.points)), voxel)
            cardinality, attitude_ok, correct = solve_cache[key]
            outcomes.append(PairOutcome(iou_cache[key], cardinality,
                                        attitude_ok, correct))
    return outcomes


def timing(map_a, map_b, params, repeats, max_candidates=None):
    """Wall-clock (mean, std) seconds per correspondence search step, i.e.
    one affinity + densest-clique + Arun call on a submap pair. Duplicate
    submap contents are timed once per repeat."""
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    subs_a = generate_submaps(map_a, params)
    subs_b = generate_submaps(map_b, params)
    seen, pairs = set(), []
    for sa in subs_a:
        for sb in subs_b:
            key = (sa.landmark_ids, sb.landmark_ids)
            if key not in seen:
                seen.add(key)
                pairs.append((sa, sb))
    durations = []
    for _ in range(repeats):
        for sa, sb in pairs:
            t0 = time.perf_counter()
            solve_submap_pair(sa, sb, params, max_candidates=max_candidates)
            durations.append(time.perf_counter() - t0)
    durations = np.array(durations)
    return float(durations.mean()), float(durations.std())
