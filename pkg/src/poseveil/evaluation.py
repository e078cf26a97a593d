"""Detection evaluation: IoU matching, precision/recall/F1 and 11-point AP.

Boxes are axis-aligned pixel rectangles (x, y, w, h) covering the
half-open ranges [x, x+w) and [y, y+h), so the analytic IoU agrees
exactly with a count over the integer pixel grid.

Matching follows the VOC protocol: detections are processed in descending
confidence and each claims the still-unmatched ground truth with the
highest IoU when that IoU clears the threshold; otherwise it is a false
positive. Each ground truth can be claimed once; a duplicate detection of
an already-matched truth counts as a false positive. Unmatched truths are
false negatives. True negatives do not exist for detection.

AP uses 11-point interpolation: the mean over recall anchors 0.0, 0.1,
..., 1.0 of the maximum precision among curve points with recall >= the
anchor (0 when no point qualifies). Detectors that provide no confidence
cannot produce a PR curve, so their AP is reported as unavailable.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .errors import AlignmentError, InputError
from .model import NUM_KEYPOINTS, FramePose

DEFAULT_IOU_THRESHOLD = 0.5
RECALL_ANCHORS = [i / 10.0 for i in range(11)]


@dataclass(frozen=True)
class GroundTruthBox:
    frame_index: int
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InputError("ground-truth box needs positive dimensions")


@dataclass(frozen=True)
class DetectionBox:
    frame_index: int
    x: float
    y: float
    w: float
    h: float
    confidence: Optional[float] = None  # None: detector reports no confidence

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InputError("detection box needs positive dimensions")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    degenerate: bool                 # some denominator was zero
    ap: Optional[float] = None       # None: confidences unavailable
    pr_curve: list[tuple[float, float]] = field(default_factory=list)


def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) rectangles."""
    ax, ay, aw, ah = a.x, a.y, a.w, a.h
    bx, by, bw, bh = b.x, b.y, b.w, b.h
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union


def match(
    detections: Sequence[DetectionBox],
    truths: Sequence[GroundTruthBox],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> tuple[int, int, int, list[tuple[int, int]]]:
    """Match one frame's detections to its ground truths.

    Returns (tp, fp, fn, matched (detection_idx, truth_idx) pairs).
    Detections with no confidence sort as 1.0 (evaluated as-is).
    """
    order = sorted(
        range(len(detections)),
        key=lambda i: -(detections[i].confidence if detections[i].confidence is not None else 1.0),
    )
    claimed: set[int] = set()
    pairs: list[tuple[int, int]] = []
    tp = fp = 0
    for di in order:
        best_iou = 0.0
        best_gt = None
        for gi, gt in enumerate(truths):
            if gi in claimed:
                continue
            v = iou(detections[di], gt)
            if v > best_iou:
                best_iou = v
                best_gt = gi
        if best_gt is not None and best_iou >= iou_threshold:
            claimed.add(best_gt)
            pairs.append((di, best_gt))
            tp += 1
        else:
            fp += 1
    fn = len(truths) - len(claimed)
    return tp, fp, fn, pairs


def metrics(tp: int, fp: int, fn: int) -> tuple[float, float, float, bool]:
    """Precision, recall, F1; zero with a degenerate flag when undefined."""
    degenerate = False
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, degenerate = 0.0, True
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall, degenerate = 0.0, True
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1, degenerate = 0.0, True
    return precision, recall, f1, degenerate


def eleven_point_ap(curve: Sequence[tuple[float, float]]) -> float:
    """Mean of interpolated precision at recalls 0.0, 0.1, ..., 1.0."""
    total = 0.0
    for anchor in RECALL_ANCHORS:
        best = 0.0
        for recall, precision in curve:
            if recall >= anchor and precision > best:
                best = precision
        total += best
    return total / len(RECALL_ANCHORS)


def average_precision(
    detections: Sequence[DetectionBox],
    truths: Sequence[GroundTruthBox],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> tuple[float, list[tuple[float, float]]]:
    """11-point AP over a whole video (or dataset) of frames.

    Detections are swept in descending confidence; after each one the
    running (recall, precision) is appended to the curve. Matching state
    is per-frame, so a detection only competes for truths in its frame.
    """
    if not truths:
        raise InputError("average precision needs at least one ground-truth box")
    if any(d.confidence is None for d in detections):
        raise InputError("average precision needs a confidence for every detection")

    truths_by_frame: dict[int, list[GroundTruthBox]] = defaultdict(list)
    for gt in truths:
        truths_by_frame[gt.frame_index].append(gt)

    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    claimed: dict[int, set[int]] = defaultdict(set)
    curve: list[tuple[float, float]] = []
    tp = fp = 0
    for di in order:
        det = detections[di]
        frame_truths = truths_by_frame.get(det.frame_index, [])
        best_iou = 0.0
        best_gt = None
        for gi, gt in enumerate(frame_truths):
            if gi in claimed[det.frame_index]:
                continue
            v = iou(det, gt)
            if v > best_iou:
                best_iou = v
                best_gt = gi
        if best_gt is not None and best_iou >= iou_threshold:
            claimed[det.frame_index].add(best_gt)
            tp += 1
        else:
            fp += 1
        curve.append((tp / len(truths), tp / (tp + fp)))
    return eleven_point_ap(curve), curve


def evaluate(
    detections: Sequence[DetectionBox],
    truths: Sequence[GroundTruthBox],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> EvalReport:
    """Full evaluation across frames: counts, P/R/F1 and (when every
    detection carries a confidence) the PR curve and AP."""
    dets_by_frame: dict[int, list[DetectionBox]] = defaultdict(list)
    for d in detections:
        dets_by_frame[d.frame_index].append(d)
    truths_by_frame: dict[int, list[GroundTruthBox]] = defaultdict(list)
    for gt in truths:
        truths_by_frame[gt.frame_index].append(gt)

    tp = fp = fn = 0
    for frame in sorted(set(dets_by_frame) | set(truths_by_frame)):
        t, f, n, _ = match(dets_by_frame[frame], truths_by_frame[frame], iou_threshold)
        tp, fp, fn = tp + t, fp + f, fn + n

    precision, recall, f1, degenerate = metrics(tp, fp, fn)
    report = EvalReport(tp, fp, fn, precision, recall, f1, degenerate)
    if truths and all(d.confidence is not None for d in detections):
        report.ap, report.pr_curve = average_precision(detections, truths, iou_threshold)
    return report


def keypoint_diff(
    a: list[FramePose], b: list[FramePose]
) -> list[tuple[float, float, float]]:
    """Per-keypoint-index comparison of two aligned pose sets.

    Returns, for each of the 25 indices, (mean confidence in a, mean
    confidence in b, mean Euclidean coordinate distance). Frames must
    carry the same indices and persons must align by track_id.
    """
    a_by_frame = {fp.frame_index: fp for fp in a}
    b_by_frame = {fp.frame_index: fp for fp in b}
    if set(a_by_frame) != set(b_by_frame):
        raise AlignmentError("frame index sets differ between the two pose sets")

    conf_a = [0.0] * NUM_KEYPOINTS
    conf_b = [0.0] * NUM_KEYPOINTS
    err = [0.0] * NUM_KEYPOINTS
    count = 0
    for idx in sorted(a_by_frame):
        fa, fb = a_by_frame[idx], b_by_frame[idx]
        pa = {tid: s for s, tid in fa.people}
        pb = {tid: s for s, tid in fb.people}
        if None in pa or None in pb or set(pa) != set(pb):
            raise AlignmentError(f"frame {idx}: persons do not align by track_id")
        for tid in pa:
            sa, sb = pa[tid], pb[tid]
            for k in range(NUM_KEYPOINTS):
                conf_a[k] += sa[k].c
                conf_b[k] += sb[k].c
                err[k] += math.hypot(sa[k].x - sb[k].x, sa[k].y - sb[k].y)
            count += 1
    if count == 0:
        raise AlignmentError("no aligned persons to compare")
    return [(conf_a[k] / count, conf_b[k] / count, err[k] / count) for k in range(NUM_KEYPOINTS)]


# ---------------------------------------------------------------------------
# file formats

GT_HEADER = ["frame", "x", "y", "w", "h"]
DET_HEADER = ["frame", "x", "y", "w", "h", "confidence"]


def load_ground_truths(path: str | Path) -> list[GroundTruthBox]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != GT_HEADER:
            raise InputError(f"{path}: expected header {','.join(GT_HEADER)}")
        return [
            GroundTruthBox(
                int(r["frame"]), float(r["x"]), float(r["y"]), float(r["w"]), float(r["h"])
            )
            for r in reader
        ]


def load_detections(path: str | Path) -> list[DetectionBox]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != DET_HEADER:
            raise InputError(f"{path}: expected header {','.join(DET_HEADER)}")
        out = []
        for r in reader:
            conf = r["confidence"].strip()
            out.append(
                DetectionBox(
                    int(r["frame"]),
                    float(r["x"]),
                    float(r["y"]),
                    float(r["w"]),
                    float(r["h"]),
                    confidence=float(conf) if conf else None,
                )
            )
        return out


def write_detections(path: str | Path, detections: Sequence[DetectionBox]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DET_HEADER)
        for d in detections:
            writer.writerow(
                [
                    d.frame_index,
                    repr(d.x),
                    repr(d.y),
                    repr(d.w),
                    repr(d.h),
                    "" if d.confidence is None else repr(d.confidence),
                ]
            )


def boxes_to_detections(face_boxes, confidence: float = 1.0) -> list[DetectionBox]:
    """Lift the pipeline's own face boxes into the detection format so the
    pipeline can be evaluated against a manual ground truth."""
    return [
        DetectionBox(
            b.frame_index,
            b.cx - b.side / 2.0,
            b.cy - b.side / 2.0,
            b.side,
            b.side,
            confidence=confidence,
        )
        for b in face_boxes
    ]


def write_pr_curve(path: str | Path, curve: Sequence[tuple[float, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["recall", "precision"])
        for recall, precision in curve:
            writer.writerow([repr(recall), repr(precision)])


def report_lines(report: EvalReport) -> list[str]:
    lines = [
        f"tp: {report.tp}",
        f"fp: {report.fp}",
        f"fn: {report.fn}",
        f"precision: {report.precision:.6f}",
        f"recall: {report.recall:.6f}",
        f"f1: {report.f1:.6f}",
    ]
    if report.degenerate:
        lines.append("degenerate: true (a denominator was zero; affected metrics reported as 0)")
    lines.append("ap: " + (f"{report.ap:.6f}" if report.ap is not None else "unavailable"))
    return lines
