"""Repairing unreliable keypoints by per-axis linear interpolation.

A keypoint observation is bad when its confidence falls below the
threshold (default 0.50). For every maximal run of bad frames bounded by
good observations at frames a < b, each bad frame f is replaced with

    x(f) = x(a) + (x(b) - x(a)) * (f - a) / (b - a)

and likewise for y. Runs at the start or end of a track hold the nearest
good value instead of inventing motion. Good observations pass through
bit-identical. Repaired keypoints get confidence equal to the threshold
and an ``interpolated`` marker.

Face-only scope touches just the five facial indices; whole-body scope
repairs all 25. Face blurring requires every facial point to be
recoverable, so in face-only scope a facial keypoint with zero good
observations across the track is a hard error rather than a report entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import FaceTrackError, InputError
from .model import (
    DEFAULT_CONF_THRESHOLD,
    FACE_INDICES,
    NUM_KEYPOINTS,
    Keypoint,
    Skeleton,
    Track,
)

FACE_ONLY = "face"
WHOLE_BODY = "body"


def scope_indices(scope: str) -> tuple[int, ...]:
    if scope == FACE_ONLY:
        return FACE_INDICES
    if scope == WHOLE_BODY:
        return tuple(range(NUM_KEYPOINTS))
    raise InputError(f"unknown interpolation scope '{scope}' (use '{FACE_ONLY}' or '{WHOLE_BODY}')")


@dataclass
class RepairEntry:
    track_id: int
    frame_index: int
    keypoint_index: int
    reason: str  # "interpolated" | "held_edge" | "unrecoverable"


def interpolate_track(
    track: Track,
    scope: str = FACE_ONLY,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
) -> tuple[Track, list[RepairEntry]]:
    """Repair one track; returns the repaired track and a bad-frame report."""
    if not 0.0 < conf_threshold < 1.0:
        raise InputError(f"conf_threshold {conf_threshold} outside (0, 1)")
    indices = scope_indices(scope)
    frame_ids = track.frame_indices()
    repaired = {f: list(track.frames[f].keypoints) for f in frame_ids}
    report: list[RepairEntry] = []

    for kp_idx in indices:
        good = [f for f in frame_ids if track.frames[f][kp_idx].c >= conf_threshold]
        bad = [f for f in frame_ids if track.frames[f][kp_idx].c < conf_threshold]
        if not bad:
            continue
        if not good:
            if scope == FACE_ONLY:
                raise FaceTrackError(
                    f"track {track.track_id}: facial keypoint {kp_idx} has no reliable "
                    f"observation in any frame; its face cannot be blurred automatically"
                )
            for f in bad:
                report.append(RepairEntry(track.track_id, f, kp_idx, "unrecoverable"))
            continue

        for f in bad:
            # nearest good observations on either side of f
            before = _floor(good, f)
            after = _ceil(good, f)
            if before is not None and after is not None:
                a_kp = track.frames[before][kp_idx]
                b_kp = track.frames[after][kp_idx]
                t = (f - before) / (after - before)
                x = a_kp.x + (b_kp.x - a_kp.x) * t
                y = a_kp.y + (b_kp.y - a_kp.y) * t
                reason = "interpolated"
            else:
                src = before if before is not None else after
                src_kp = track.frames[src][kp_idx]
                x, y = src_kp.x, src_kp.y
                reason = "held_edge"
            repaired[f][kp_idx] = Keypoint(x, y, conf_threshold, interpolated=True)
            report.append(RepairEntry(track.track_id, f, kp_idx, reason))

    frames = {f: Skeleton(tuple(repaired[f])) for f in frame_ids}
    out = Track(track_id=track.track_id, frames=frames, presence_ratio=track.presence_ratio)
    return out, report


def _floor(sorted_vals: list[int], x: int) -> int | None:
    best = None
    for v in sorted_vals:
        if v < x:
            best = v
        else:
            break
    return best


def _ceil(sorted_vals: list[int], x: int) -> int | None:
    for v in sorted_vals:
        if v > x:
            return v
    return None


def interpolate_tracks(
    tracks: list[Track],
    scope: str = FACE_ONLY,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
) -> tuple[list[Track], list[RepairEntry]]:
    out = []
    report: list[RepairEntry] = []
    for t in tracks:
        rt, entries = interpolate_track(t, scope, conf_threshold)
        out.append(rt)
        report.extend(entries)
    return out, report


def write_repair_report(path: str | Path, report: list[RepairEntry]) -> None:
    payload = [
        {
            "track_id": e.track_id,
            "frame": e.frame_index,
            "keypoint": e.keypoint_index,
            "reason": e.reason,
        }
        for e in report
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
