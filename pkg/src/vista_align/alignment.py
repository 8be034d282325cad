"""Rigid frame alignment from inlier associations (Arun's SVD method) plus
dynamic-feasibility pruning and the all-to-all submap matching driver.

Hypotheses map coordinates expressed in map A's frame into map B's frame.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .association import build_affinity, densest_clique
from .core import DegenerateGeometryError, RigidTransform, transform_angles
from .submap import generate_submaps


@dataclass(frozen=True)
class AlignmentHypothesis:
    transform: RigidTransform
    inliers: frozenset        # Association set S
    cardinality: int          # |S|
    source_submap: int
    target_submap: int

    def __post_init__(self):
        object.__setattr__(self, "inliers", frozenset(self.inliers))
        if self.cardinality != len(self.inliers):
            raise ValueError("cardinality must equal |inliers|")


def arun(points_a, points_b):
    """Least-squares rigid transform with b_k ~ R a_k + t, via SVD of the
    cross-covariance with reflection correction."""
    pa = np.asarray(points_a, dtype=float)
    pb = np.asarray(points_b, dtype=float)
    if pa.shape != pb.shape or pa.ndim != 2 or pa.shape[1] != 3:
        raise ValueError("point sets must both be (n, 3)")
    if len(pa) < 3:
        raise ValueError("at least 3 correspondences are required")
    ca, cb = pa.mean(axis=0), pb.mean(axis=0)
    H = (pa - ca).T @ (pb - cb)
    U, S, Vt = np.linalg.svd(H)
    if S[1] < 1e-9 * max(S[0], 1e-300):
        raise DegenerateGeometryError("correspondences are collinear")
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    t = cb - R @ ca
    return RigidTransform(R, t)


def prune(hypothesis, params):
    """Return None to keep, or a rejection reason ('attitude'/'cardinality')."""
    roll, pitch, _ = transform_angles(hypothesis.transform)
    if abs(roll) > params.theta_rp or abs(pitch) > params.theta_rp:
        return "attitude"
    if hypothesis.cardinality <= params.s_max:
        return "cardinality"
    return None


def solve_submap_pair(submap_a, submap_b, params, max_candidates=None):
    """One correspondence search step: affinity -> densest clique -> Arun.

    Returns (transform, inlier set) or None when no transform is estimable
    (fewer than 3 inliers, or degenerate geometry).
    """
    kwargs = {} if max_candidates is None else {"max_candidates": max_candidates}
    assoc, affinity = build_affinity(submap_a, submap_b, params, **kwargs)
    inliers = densest_clique(affinity, assoc)
    if len(inliers) < 3:
        return None
    ordered = sorted(inliers, key=lambda a: (a.index_a, a.index_b))
    pa = submap_a.points[[a.index_a for a in ordered]]
    pb = submap_b.points[[a.index_b for a in ordered]]
    try:
        transform = arun(pa, pb)
    except DegenerateGeometryError:
        return None
    return transform, frozenset(inliers)


def align_maps(map_a, map_b, params, max_candidates=None, threads=1):
    """All-to-all submap comparison between two maps.

    Returns all kept hypotheses sorted by cardinality descending, ties broken
    by (source submap id, target submap id). Submap pairs with identical
    landmark content share one solve (results are identical by construction).
    """
    if len(map_a) == 0 or len(map_b) == 0:
        raise ValueError("maps must be non-empty")
    subs_a = generate_submaps(map_a, params)
    subs_b = generate_submaps(map_b, params)

    pair_keys = {}
    for ia, sa in enumerate(subs_a):
        for ib, sb in enumerate(subs_b):
            pair_keys[(ia, ib)] = (sa.landmark_ids, sb.landmark_ids)
    unique = {}
    for (ia, ib), key in pair_keys.items():
        unique.setdefault(key, (ia, ib))

    def solve(key):
        ia, ib = unique[key]
        return key, solve_submap_pair(subs_a[ia], subs_b[ib], params,
                                      max_candidates=max_candidates)

    if threads > 1 and len(unique) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(solve, list(unique)))
    else:
        results = dict(solve(key) for key in unique)

    hypotheses = []
    for (ia, ib), key in pair_keys.items():
        res = results[key]
        if res is None:
            continue
        transform, inliers = res
        hyp = AlignmentHypothesis(transform, inliers, len(inliers), ia, ib)
        if prune(hyp, params) is None:
            hypotheses.append(hyp)
    hypotheses.sort(key=lambda h: (-h.cardinality, h.source_submap, h.target_submap))
    return hypotheses
