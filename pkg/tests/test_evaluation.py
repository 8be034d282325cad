import numpy as np
import pytest

from vista_align.core import (Hyperparameters, Landmark, ObjectMap,
                              RigidTransform, rotation_x, rotation_z)
from vista_align.evaluation import (PairOutcome, classify, default_voxel,
                                    evaluate_map_pair, precision_recall,
                                    submap_iou, timing)
from vista_align.submap import Submap


def sub(points):
    pts = np.asarray(points, dtype=float)
    return Submap([0.0, 0.0], list(range(len(pts))), pts)


def map_from_points(points):
    return ObjectMap("a", [Landmark(i, p, 1e-4 * np.eye(3))
                           for i, p in enumerate(points)])


def test_default_voxel_is_quarter_window():
    assert default_voxel(Hyperparameters()) == 0.5


def test_iou_identical_submaps():
    pts = np.random.default_rng(0).uniform(size=(10, 3))
    assert submap_iou(sub(pts), sub(pts), 0.5) == 1.0


def test_iou_disjoint_submaps():
    pts = np.random.default_rng(1).uniform(size=(8, 3))
    assert submap_iou(sub(pts), sub(pts + 100.0), 0.5) == 0.0


def test_iou_hand_constructed_third():
    # submap A occupies voxels {0..7}, submap B occupies {4..11}:
    # intersection 4 cells, union 12 cells -> 1/3
    a = [[float(i) + 0.5, 0.5, 0.5] for i in range(8)]
    b = [[float(i) + 0.5, 0.5, 0.5] for i in range(4, 12)]
    assert submap_iou(sub(a), sub(b), 1.0) == pytest.approx(1.0 / 3.0)


def test_iou_symmetric():
    rng = np.random.default_rng(2)
    a, b = rng.uniform(size=(6, 3)), rng.uniform(size=(6, 3))
    assert submap_iou(sub(a), sub(b), 0.3) == submap_iou(sub(b), sub(a), 0.3)


def test_iou_empty_submap_is_zero():
    empty = Submap([0.0, 0.0], [], np.zeros((0, 3)))
    assert submap_iou(empty, sub([[0.0, 0.0, 0.0]]), 0.5) == 0.0


def test_iou_validates_voxel():
    with pytest.raises(ValueError):
        submap_iou(sub([[0.0, 0.0, 0.0]]), sub([[0.0, 0.0, 0.0]]), 0.0)


def test_classify_truth_is_correct():
    truth = RigidTransform(rotation_z(40.0), np.array([3.0, 1.0, 0.0]))
    assert classify(truth, truth, Hyperparameters())


def test_classify_translation_gate():
    truth = RigidTransform.identity()
    params = Hyperparameters()
    bad = RigidTransform(np.eye(3), np.array([1.6, 0.0, 0.0]))
    ok = RigidTransform(np.eye(3), np.array([1.4, 0.0, 0.0]))
    assert not classify(bad, truth, params)
    assert classify(ok, truth, params)


def test_classify_yaw_gate():
    truth = RigidTransform.identity()
    params = Hyperparameters()
    assert not classify(RigidTransform(rotation_z(31.0), np.zeros(3)),
                        truth, params)
    assert classify(RigidTransform(rotation_z(29.0), np.zeros(3)),
                    truth, params)


def test_classify_roll_pitch_gate():
    truth = RigidTransform.identity()
    params = Hyperparameters()
    assert not classify(RigidTransform(rotation_x(11.0), np.zeros(3)),
                        truth, params)


def test_precision_recall_all_correct():
    outcomes = [PairOutcome(0.9, 10, True, True) for _ in range(5)]
    rows = precision_recall(outcomes, Hyperparameters(), [4])
    assert rows[0].precision == 1.0 and rows[0].recall == 1.0
    assert rows[0].n_hypothesized == 5 and rows[0].n_overlapping == 5


def test_precision_recall_counting():
    # 10 hypothesized (8 correct); 20 overlapping pairs, 8 recovered correctly
    outcomes = []
    outcomes += [PairOutcome(0.9, 10, True, True) for _ in range(8)]
    outcomes += [PairOutcome(0.1, 10, True, False) for _ in range(2)]
    outcomes += [PairOutcome(0.9, 0, False, False) for _ in range(12)]
    rows = precision_recall(outcomes, Hyperparameters(), [4])
    assert rows[0].precision == pytest.approx(0.8)
    assert rows[0].recall == pytest.approx(0.4)
    assert rows[0].n_hypothesized == 10
    assert rows[0].n_overlapping == 20


def test_precision_recall_cardinality_gate_strict():
    outcomes = [PairOutcome(0.9, 5, True, True)]
    rows = precision_recall(outcomes, Hyperparameters(), [4, 5])
    assert rows[0].n_hypothesized == 1
    assert rows[1].n_hypothesized == 0


def test_precision_recall_undefined_precision_flagged():
    outcomes = [PairOutcome(0.9, 2, True, True)]
    row = precision_recall(outcomes, Hyperparameters(), [10])[0]
    assert row.precision == 1.0 and not row.precision_defined
    assert row.recall == 0.0


def test_precision_recall_attitude_gate_excludes():
    outcomes = [PairOutcome(0.9, 10, False, True)]
    row = precision_recall(outcomes, Hyperparameters(), [4])[0]
    assert row.n_hypothesized == 0


def test_recall_monotone_in_s_max():
    rng = np.random.default_rng(3)
    outcomes = [PairOutcome(float(rng.uniform()), int(rng.integers(0, 20)),
                            bool(rng.uniform() < 0.8),
                            bool(rng.uniform() < 0.5)) for _ in range(200)]
    rows = precision_recall(outcomes, Hyperparameters(), list(range(0, 15)))
    recalls = [r.recall for r in rows]
    hyped = [r.n_hypothesized for r in rows]
    assert all(a >= b for a, b in zip(recalls, recalls[1:]))
    assert all(a >= b for a, b in zip(hyped, hyped[1:]))


def test_evaluate_map_pair_perfect_alignment():
    rng = np.random.default_rng(4)
    pts = rng.uniform(0.0, 5.0, size=(20, 3)) * np.array([1.0, 1.0, 0.3])
    truth = RigidTransform(rotation_z(60.0), np.array([5.0, -3.0, 0.0]))
    ma = map_from_points(pts)
    mb = map_from_points(truth.apply(pts))
    params = Hyperparameters()
    outcomes = evaluate_map_pair(ma, mb, truth, params)
    assert outcomes
    rows = precision_recall(outcomes, params, [4])
    assert rows[0].precision == 1.0
    assert rows[0].recall == 1.0
    assert rows[0].n_overlapping > 0


def test_evaluate_map_pair_wrong_truth_gives_zero_recall():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0.0, 5.0, size=(15, 3)) * np.array([1.0, 1.0, 0.3])
    truth = RigidTransform(rotation_z(60.0), np.array([5.0, -3.0, 0.0]))
    wrong = RigidTransform(rotation_z(-60.0), np.array([-20.0, 10.0, 0.0]))
    ma = map_from_points(pts)
    mb = map_from_points(truth.apply(pts))
    outcomes = evaluate_map_pair(ma, mb, wrong, Hyperparameters())
    rows = precision_recall(outcomes, Hyperparameters(), [4])
    assert rows[0].precision == 0.0


def test_timing_enforces_min_repeats():
    m = map_from_points(np.random.default_rng(6).uniform(size=(8, 3)))
    with pytest.raises(ValueError):
        timing(m, m, Hyperparameters(), 2)


def test_timing_small_pair_is_fast():
    rng = np.random.default_rng(7)
    pts = rng.uniform(0.0, 0.8, size=(5, 3))
    m = map_from_points(pts)
    mean, std = timing(m, m, Hyperparameters(), 5)
    assert mean < 0.01
    assert std >= 0.0
