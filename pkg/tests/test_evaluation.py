import math
import random
from collections import defaultdict

import numpy as np
import pytest

from poseveil.errors import AlignmentError, InputError
from poseveil.evaluation import (
    DetectionBox,
    GroundTruthBox,
    average_precision,
    eleven_point_ap,
    evaluate,
    iou,
    keypoint_diff,
    load_detections,
    load_ground_truths,
    match,
    metrics,
    write_detections,
)
from poseveil.model import Keypoint, Skeleton
from util import frame, skel


def gt(x, y, w, h, f=0):
    return GroundTruthBox(f, x, y, w, h)


def det(x, y, w, h, conf=1.0, f=0):
    return DetectionBox(f, x, y, w, h, confidence=conf)


# -- IoU --------------------------------------------------------------


def raster_iou(a, b):
    """Oracle: count pixels on the integer grid covered by each box."""
    x_lo = min(a.x, b.x)
    y_lo = min(a.y, b.y)
    x_hi = max(a.x + a.w, b.x + b.w)
    y_hi = max(a.y + a.h, b.y + b.h)
    width = int(x_hi - x_lo)
    height = int(y_hi - y_lo)
    grid_a = np.zeros((height, width), dtype=bool)
    grid_b = np.zeros((height, width), dtype=bool)
    grid_a[int(a.y - y_lo) : int(a.y - y_lo + a.h), int(a.x - x_lo) : int(a.x - x_lo + a.w)] = True
    grid_b[int(b.y - y_lo) : int(b.y - y_lo + b.h), int(b.x - x_lo) : int(b.x - x_lo + b.w)] = True
    union = (grid_a | grid_b).sum()
    return (grid_a & grid_b).sum() / union


def test_iou_identical():
    assert iou(gt(3, 4, 10, 12), gt(3, 4, 10, 12)) == 1.0


def test_iou_disjoint():
    assert iou(gt(0, 0, 10, 10), gt(20, 20, 5, 5)) == 0.0


def test_iou_worked_example():
    # intersection 50, union 150
    v = iou(gt(0, 0, 10, 10), gt(5, 0, 10, 10))
    assert v == pytest.approx(1 / 3)
    assert v == raster_iou(gt(0, 0, 10, 10), gt(5, 0, 10, 10))


def test_iou_symmetry_and_range():
    rng = random.Random(31)
    for _ in range(200):
        a = gt(rng.randint(0, 50), rng.randint(0, 50), rng.randint(1, 30), rng.randint(1, 30))
        b = gt(rng.randint(0, 50), rng.randint(0, 50), rng.randint(1, 30), rng.randint(1, 30))
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0
        assert v == raster_iou(a, b)


# -- matching ----------------------------------------------------------


def test_match_exact_detection():
    tp, fp, fn, pairs = match([det(0, 0, 10, 10)], [gt(0, 0, 10, 10)])
    assert (tp, fp, fn) == (1, 0, 0)
    assert pairs == [(0, 0)]


def test_match_duplicate_detection_is_fp():
    tp, fp, fn, _ = match([det(0, 0, 10, 10, 0.9), det(0, 0, 10, 10, 0.8)], [gt(0, 0, 10, 10)])
    assert (tp, fp, fn) == (1, 1, 0)


def test_match_no_detections():
    tp, fp, fn, _ = match([], [gt(0, 0, 10, 10), gt(30, 0, 10, 10)])
    assert (tp, fp, fn) == (0, 0, 2)


def test_match_below_threshold_is_fp_and_fn():
    tp, fp, fn, _ = match([det(8, 0, 10, 10)], [gt(0, 0, 10, 10)])  # IoU = 2/18
    assert (tp, fp, fn) == (0, 1, 1)


def test_match_confidence_order_decides_claims():
    # the higher-confidence detection claims the truth
    d_lo = det(1, 0, 10, 10, 0.5)
    d_hi = det(0, 0, 10, 10, 0.9)
    tp, fp, fn, pairs = match([d_lo, d_hi], [gt(0, 0, 10, 10)])
    assert (tp, fp, fn) == (1, 1, 0)
    assert pairs == [(1, 0)]


def test_match_count_invariants():
    rng = random.Random(37)
    for _ in range(100):
        dets = [
            det(rng.randint(0, 40), rng.randint(0, 40), rng.randint(2, 20), rng.randint(2, 20),
                conf=rng.random())
            for _ in range(rng.randint(0, 8))
        ]
        gts = [
            gt(rng.randint(0, 40), rng.randint(0, 40), rng.randint(2, 20), rng.randint(2, 20))
            for _ in range(rng.randint(0, 8))
        ]
        tp, fp, fn, _ = match(dets, gts)
        assert tp + fp == len(dets)
        assert tp + fn == len(gts)


# -- metrics -----------------------------------------------------------


def test_metrics_formula():
    p, r, f1, degenerate = metrics(10, 5, 10)
    assert p == pytest.approx(10 / 15)
    assert r == pytest.approx(0.5)
    assert f1 == pytest.approx(2 * p * r / (p + r))
    assert not degenerate


def test_metrics_published_scorecards():
    # counts engineered to reproduce two published detector rows exactly
    p, r, f1, _ = metrics(98208, 792, 992)
    assert (round(p, 3), round(r, 3), round(f1, 3)) == (0.992, 0.990, 0.991)
    p, r, f1, _ = metrics(9843, 1737, 7157)
    assert (round(p, 3), round(r, 3), round(f1, 3)) == (0.850, 0.579, 0.689)


def test_metrics_degenerate_zero_counts():
    p, r, f1, degenerate = metrics(0, 0, 0)
    assert (p, r, f1) == (0.0, 0.0, 0.0)
    assert degenerate


# -- average precision ---------------------------------------------------


def naive_ap(dets, gts, iou_threshold=0.5):
    """Oracle: re-run a from-scratch matcher at every confidence cut."""
    def match_once(subset):
        by_frame = defaultdict(list)
        for d in subset:
            by_frame[d.frame_index].append(d)
        gts_by_frame = defaultdict(list)
        for g in gts:
            gts_by_frame[g.frame_index].append(g)
        tp = fp = 0
        for f, frame_dets in by_frame.items():
            taken = set()
            for d in sorted(frame_dets, key=lambda d: -d.confidence):
                best, best_v = None, 0.0
                for gi, g in enumerate(gts_by_frame[f]):
                    if gi in taken:
                        continue
                    v = iou(d, g)
                    if v > best_v:
                        best, best_v = gi, v
                if best is not None and best_v >= iou_threshold:
                    taken.add(best)
                    tp += 1
                else:
                    fp += 1
        return tp, fp

    curve = []
    for thr in sorted({d.confidence for d in dets}, reverse=True):
        tp, fp = match_once([d for d in dets if d.confidence >= thr])
        curve.append((tp / len(gts), tp / (tp + fp)))
    best_at = []
    for anchor in [i / 10 for i in range(11)]:
        best_at.append(max((p for r, p in curve if r >= anchor), default=0.0))
    return sum(best_at) / 11.0


def test_ap_perfect_detector():
    gts = [gt(0, 0, 10, 10, f=0), gt(50, 50, 10, 10, f=1)]
    dets = [det(0, 0, 10, 10, 1.0, f=0), det(50, 50, 10, 10, 1.0, f=1)]
    ap, _ = average_precision(dets, gts)
    assert ap == 1.0


def test_ap_zero_detections():
    ap, curve = average_precision([], [gt(0, 0, 10, 10)])
    assert ap == 0.0
    assert curve == []


def test_ap_worked_example():
    gts = [gt(0, 0, 10, 10), gt(100, 0, 10, 10)]
    dets = [
        det(0, 0, 10, 10, 0.9),
        det(50, 50, 10, 10, 0.8),
        det(100, 0, 10, 10, 0.7),
    ]
    ap, curve = average_precision(dets, gts)
    assert curve == [(0.5, 1.0), (0.5, 0.5), (1.0, pytest.approx(2 / 3))]
    assert ap == pytest.approx((6 * 1.0 + 5 * (2 / 3)) / 11)
    assert ap == pytest.approx(0.8485, abs=1e-4)


def test_ap_requires_ground_truths():
    with pytest.raises(InputError):
        average_precision([det(0, 0, 10, 10)], [])


def test_ap_requires_confidences():
    bare = DetectionBox(0, 0, 0, 10, 10, confidence=None)
    with pytest.raises(InputError):
        average_precision([bare], [gt(0, 0, 10, 10)])


def test_ap_matches_brute_force_oracle():
    rng = random.Random(41)
    for _ in range(30):
        n_gt = rng.randint(1, 8)
        gts = [
            gt(rng.randint(0, 60), rng.randint(0, 60), rng.randint(4, 20), rng.randint(4, 20),
               f=rng.randint(0, 2))
            for _ in range(n_gt)
        ]
        confs = rng.sample(range(1, 1000), rng.randint(0, 10))
        dets = [
            det(rng.randint(0, 60), rng.randint(0, 60), rng.randint(4, 20), rng.randint(4, 20),
                conf=c / 1000.0, f=rng.randint(0, 2))
            for c in confs
        ]
        ap, _ = average_precision(dets, gts)
        assert ap == pytest.approx(naive_ap(dets, gts), abs=1e-9)


def test_ap_never_decreases_when_fp_becomes_tp():
    gts = [gt(0, 0, 10, 10), gt(100, 0, 10, 10)]
    with_fp = [det(0, 0, 10, 10, 0.9), det(50, 50, 10, 10, 0.6)]
    with_tp = [det(0, 0, 10, 10, 0.9), det(100, 0, 10, 10, 0.6)]
    ap_fp, _ = average_precision(with_fp, gts)
    ap_tp, _ = average_precision(with_tp, gts)
    assert ap_tp >= ap_fp


def test_eleven_point_ap_bounds():
    assert 0.0 <= eleven_point_ap([(0.3, 0.9), (0.7, 0.4)]) <= 1.0


# -- evaluate / keypoint comparison -------------------------------------


def test_evaluate_without_confidences_skips_ap():
    dets = [DetectionBox(0, 0, 0, 10, 10, confidence=None)]
    gts = [gt(0, 0, 10, 10)]
    report = evaluate(dets, gts)
    assert report.tp == 1
    assert report.ap is None
    assert report.pr_curve == []


def test_evaluate_empty_detector_is_degenerate_not_crash():
    report = evaluate([], [gt(0, 0, 10, 10)])
    assert (report.tp, report.fp, report.fn) == (0, 0, 1)
    assert report.precision == 0.0
    assert report.degenerate


def shifted_frames(dx, dy):
    a, b = [], []
    for f in range(3):
        s = skel({i: (10.0 * i + f, 5.0 * i, 0.8) for i in range(25)})
        shifted = Skeleton(tuple(Keypoint(kp.x + dx, kp.y + dy, kp.c) for kp in s.keypoints))
        a.append(frame(f, s, track_ids=(0,)))
        b.append(frame(f, shifted, track_ids=(0,)))
    return a, b


def test_keypoint_diff_identity():
    a, _ = shifted_frames(0, 0)
    rows = keypoint_diff(a, a)
    for conf_a, conf_b, err in rows:
        assert conf_a == conf_b
        assert err == 0.0


def test_keypoint_diff_hypotenuse():
    a, b = shifted_frames(3, 4)
    rows = keypoint_diff(a, b)
    for _, _, err in rows:
        assert err == pytest.approx(5.0)


def test_keypoint_diff_matches_naive_reference():
    rng = random.Random(43)
    a, b = [], []
    for f in range(4):
        sa, sb = [], []
        for tid in range(2):
            pts_a = {i: (rng.uniform(0, 100), rng.uniform(0, 100), rng.random()) for i in range(25)}
            pts_b = {i: (rng.uniform(0, 100), rng.uniform(0, 100), rng.random()) for i in range(25)}
            sa.append(skel(pts_a))
            sb.append(skel(pts_b))
        a.append(frame(f, *sa, track_ids=(0, 1)))
        b.append(frame(f, *sb, track_ids=(0, 1)))
    rows = keypoint_diff(a, b)

    # independent double-loop reference
    for k in range(25):
        ca, cb, err, n = 0.0, 0.0, 0.0, 0
        for fa, fb in zip(a, b):
            for (skel_a, tid_a) in fa.people:
                for (skel_b, tid_b) in fb.people:
                    if tid_a == tid_b:
                        ca += skel_a[k].c
                        cb += skel_b[k].c
                        err += math.hypot(
                            skel_a[k].x - skel_b[k].x, skel_a[k].y - skel_b[k].y
                        )
                        n += 1
        assert rows[k][0] == pytest.approx(ca / n)
        assert rows[k][1] == pytest.approx(cb / n)
        assert rows[k][2] == pytest.approx(err / n)


def test_keypoint_diff_misaligned_frames():
    a, b = shifted_frames(0, 0)
    with pytest.raises(AlignmentError):
        keypoint_diff(a, b[:-1])


def test_detection_csv_round_trip(tmp_path):
    dets = [det(1.5, 2.25, 10, 12, 0.75, f=3), DetectionBox(4, 0, 0, 5, 5, confidence=None)]
    path = tmp_path / "det.csv"
    write_detections(path, dets)
    assert load_detections(path) == dets


def test_gt_csv_header_check(tmp_path):
    path = tmp_path / "gt.csv"
    path.write_text("frame,x,y,w\n0,1,2,3\n")
    with pytest.raises(InputError):
        load_ground_truths(path)
