"""Assigning a stable unique ID to every person across frames.

People are matched frame-to-frame by the distance between their body
centroid and each active track's centroid averaged over the previous
five frames. A person farther than a threshold (a fraction of the frame
diagonal) from every active track starts a new ID. IDs are never reused.

The matcher resolves contention globally: all candidate (person, track)
pairs are sorted by distance and accepted greedily, so the result does
not depend on the order people appear in a file. Ties prefer the lower
track_id. This assumes centroids of different people do not collide;
crossing trajectories are out of scope.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import InputError
from .model import (
    DEFAULT_CONF_THRESHOLD,
    FramePose,
    Track,
    VideoGeometry,
    centroid,
    fallback_centroid,
    tracks_from_frames,
)

HISTORY_WINDOW = 5          # frames of centroid history consulted per track
DEFAULT_THRESHOLD = 0.15    # new-person distance as a fraction of the diagonal


@dataclass
class TrackerState:
    """Mutable matcher state carried across frames of one video."""

    next_id: int = 0
    # track_id -> [(frame_index, (cx, cy)), ...] most recent last
    history: dict[int, list[tuple[int, tuple[float, float]]]] = field(default_factory=dict)

    def fresh_id(self) -> int:
        tid = self.next_id
        self.next_id += 1
        return tid

    def observe(self, track_id: int, frame_index: int, point: tuple[float, float]) -> None:
        self.history.setdefault(track_id, []).append((frame_index, point))

    def window_average(self, track_id: int, frame_index: int) -> Optional[tuple[float, float]]:
        """Average centroid over the last HISTORY_WINDOW frames before
        ``frame_index``; None when the track was absent for all of them."""
        pts = [
            p
            for f, p in self.history.get(track_id, [])
            if frame_index - HISTORY_WINDOW <= f < frame_index
        ]
        if not pts:
            return None
        return (
            sum(p[0] for p in pts) / len(pts),
            sum(p[1] for p in pts) / len(pts),
        )

    def prune(self, frame_index: int) -> None:
        # drop history entries that can never be consulted again
        for tid in list(self.history):
            kept = [e for e in self.history[tid] if e[0] >= frame_index - HISTORY_WINDOW]
            if kept:
                self.history[tid] = kept
            else:
                del self.history[tid]


@dataclass
class NewIdEvent:
    frame_index: int
    track_id: int
    reason: str  # "first_frame" | "new_person" | "no_active_track"


def _person_point(skel, conf_threshold: float) -> Optional[tuple[float, float]]:
    # fall back to low-confidence keypoints rather than leaving a detected
    # person unplaceable; a fully undetected skeleton has no position
    return centroid(skel, conf_threshold) or fallback_centroid(skel)


def assign_ids(
    frames: list[FramePose],
    geom: VideoGeometry,
    threshold_fraction: float = DEFAULT_THRESHOLD,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
) -> tuple[list[FramePose], list[Track], list[NewIdEvent]]:
    """Assign unique IDs to every person in every frame.

    Frames must be ordered by frame_index. Returns the tracked frames,
    the per-person Tracks (presence over len(frames)) and the new-ID
    events for the tracking report.
    """
    if not frames:
        raise InputError("no frames to track")
    if not 0.0 < threshold_fraction <= 1.0:
        raise InputError(f"threshold_fraction {threshold_fraction} outside (0, 1]")

    max_distance = threshold_fraction * geom.diagonal
    state = TrackerState()
    events: list[NewIdEvent] = []
    tracked: list[FramePose] = []
    first = True

    for fp in frames:
        points = [_person_point(s, conf_threshold) for s in fp.skeletons]
        assigned: list[Optional[int]] = [None] * len(fp.skeletons)

        if first:
            # first frame: IDs handed out in file order
            for i in range(len(fp.skeletons)):
                tid = state.fresh_id()
                assigned[i] = tid
                events.append(NewIdEvent(fp.frame_index, tid, "first_frame"))
            first = False
        else:
            averages = {}
            for tid in state.history:
                avg = state.window_average(tid, fp.frame_index)
                if avg is not None:
                    averages[tid] = avg

            # globally greedy one-to-one matching, nearest distance first
            candidates = []
            for i, pt in enumerate(points):
                if pt is None:
                    continue
                for tid, avg in averages.items():
                    d = math.hypot(pt[0] - avg[0], pt[1] - avg[1])
                    if d <= max_distance:
                        candidates.append((d, tid, i))
            candidates.sort()
            used_tracks: set[int] = set()
            for d, tid, i in candidates:
                if assigned[i] is not None or tid in used_tracks:
                    continue
                assigned[i] = tid
                used_tracks.add(tid)

            for i in range(len(fp.skeletons)):
                if assigned[i] is None:
                    tid = state.fresh_id()
                    assigned[i] = tid
                    reason = "new_person" if averages else "no_active_track"
                    events.append(NewIdEvent(fp.frame_index, tid, reason))

        for i, tid in enumerate(assigned):
            if points[i] is not None:
                state.observe(tid, fp.frame_index, points[i])
        state.prune(fp.frame_index)

        tracked.append(FramePose(fp.frame_index, fp.skeletons, tuple(assigned)))

    tracks = tracks_from_frames(tracked, frame_count=len(frames))
    return tracked, tracks, events


def write_tracking_report(
    path: str | Path, tracks: list[Track], events: list[NewIdEvent]
) -> None:
    """Machine-readable tracking summary (tracks, presence, new-ID events)."""
    payload = {
        "tracks": [
            {
                "track_id": t.track_id,
                "first_frame": min(t.frames) if t.frames else None,
                "last_frame": max(t.frames) if t.frames else None,
                "frames_present": len(t.frames),
                "presence_ratio": t.presence_ratio,
            }
            for t in tracks
        ],
        "new_id_events": [
            {"frame": e.frame_index, "track_id": e.track_id, "reason": e.reason}
            for e in events
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
