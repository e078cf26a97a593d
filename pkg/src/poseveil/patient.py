"""Rule-based patient identification.

The patient is assumed to be the focus of the recording: tracks present
in fewer than 80% of frames are disregarded, and among the rest the one
whose body centroid stays closest to the frame center on average wins.
The full score table is returned so a reviewer can override the choice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import InputError, NoPatientError
from .model import Track, VideoGeometry, centroid

DEFAULT_PRESENCE_THRESHOLD = 0.8


@dataclass
class TrackScore:
    track_id: int
    presence_ratio: float
    eligible: bool
    mean_center_distance: Optional[float]  # None when no frame had a centroid
    selected: bool = False


def identify_patient(
    tracks: list[Track],
    geom: VideoGeometry,
    presence_threshold: float = DEFAULT_PRESENCE_THRESHOLD,
) -> tuple[int, list[TrackScore]]:
    """Pick the patient track; returns (track_id, per-track score table).

    Raises NoPatientError when nothing passes the presence filter, in
    which case the caller should fall back to blurring all persons.
    """
    if not tracks:
        raise InputError("no tracks to identify a patient from")
    if not 0.0 < presence_threshold <= 1.0:
        raise InputError(f"presence_threshold {presence_threshold} outside (0, 1]")

    cx, cy = geom.center
    scores: list[TrackScore] = []
    for t in sorted(tracks, key=lambda t: t.track_id):
        eligible = t.presence_ratio >= presence_threshold
        distances = []
        for skel in t.frames.values():
            c = centroid(skel)
            if c is not None:
                distances.append(math.hypot(c[0] - cx, c[1] - cy))
        mean_d = sum(distances) / len(distances) if distances else None
        scores.append(TrackScore(t.track_id, t.presence_ratio, eligible, mean_d))

    candidates = [s for s in scores if s.eligible and s.mean_center_distance is not None]
    if not candidates:
        raise NoPatientError(
            f"no track appears in at least {presence_threshold:.0%} of frames; "
            f"fall back to all-person blurring"
        )
    # min distance, ties to the lower track_id (candidates are id-ordered)
    best = min(candidates, key=lambda s: s.mean_center_distance)
    best.selected = True
    return best.track_id, scores


def write_score_report(path: str | Path, patient_id: int, scores: list[TrackScore]) -> None:
    payload = {
        "patient_track_id": patient_id,
        "scores": [
            {
                "track_id": s.track_id,
                "presence_ratio": s.presence_ratio,
                "eligible": s.eligible,
                "mean_center_distance": s.mean_center_distance,
                "selected": s.selected,
            }
            for s in scores
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
