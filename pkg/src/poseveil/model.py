"""Shared domain types: keypoints, skeletons, per-frame poses and tracks.

Everything here is an immutable value object, safe to share between
concurrent workers. Coordinates are kept at full input precision; nothing
is rounded until pixels are rendered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ContractError

# Index layout of the 25-point skeleton used throughout the pipeline.
BODY_25_NAMES = {
    0: "Nose",
    1: "Neck",
    2: "RShoulder",
    3: "RElbow",
    4: "RWrist",
    5: "LShoulder",
    6: "LElbow",
    7: "LWrist",
    8: "MidHip",
    9: "RHip",
    10: "RKnee",
    11: "RAnkle",
    12: "LHip",
    13: "LKnee",
    14: "LAnkle",
    15: "REye",
    16: "LEye",
    17: "REar",
    18: "LEar",
    19: "LBigToe",
    20: "LSmallToe",
    21: "LHeel",
    22: "RBigToe",
    23: "RSmallToe",
    24: "RHeel",
}

NUM_KEYPOINTS = 25

# The five facial indices (nose, both eyes, both ears).
FACE_INDICES = (0, 15, 16, 17, 18)

NECK = 1
MID_HIP = 8

# Observations below this confidence are treated as unreliable.
DEFAULT_CONF_THRESHOLD = 0.5


@dataclass(frozen=True)
class Keypoint:
    """One 2D keypoint: pixel coordinates plus estimator confidence.

    An undetected keypoint is encoded exactly as (0, 0, 0). Repaired
    keypoints carry ``interpolated=True`` so downstream consumers can
    tell them apart from measured ones.
    """

    x: float
    y: float
    c: float
    interpolated: bool = False

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"confidence {self.c} outside [0, 1]")

    @property
    def detected(self) -> bool:
        return not (self.x == 0.0 and self.y == 0.0 and self.c == 0.0)


UNDETECTED = Keypoint(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Skeleton:
    """Exactly 25 keypoints, indexed per the BODY_25 layout."""

    keypoints: tuple[Keypoint, ...]

    def __post_init__(self):
        if len(self.keypoints) != NUM_KEYPOINTS:
            raise ValueError(f"skeleton needs {NUM_KEYPOINTS} keypoints, got {len(self.keypoints)}")

    def __getitem__(self, index: int) -> Keypoint:
        return self.keypoints[index]

    def with_keypoint(self, index: int, kp: Keypoint) -> "Skeleton":
        kps = list(self.keypoints)
        kps[index] = kp
        return Skeleton(tuple(kps))

    def shifted(self, dx: float, dy: float) -> "Skeleton":
        """Translate every detected keypoint; undetected ones stay (0,0,0)."""
        kps = tuple(
            replace(kp, x=kp.x + dx, y=kp.y + dy) if kp.detected else kp
            for kp in self.keypoints
        )
        return Skeleton(kps)


@dataclass(frozen=True)
class FramePose:
    """All people detected in one frame, in file order.

    ``track_ids[i]`` is the unique person ID of ``skeletons[i]`` or None
    before tracking has run.
    """

    frame_index: int
    skeletons: tuple[Skeleton, ...]
    track_ids: tuple[Optional[int], ...]

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")
        if len(self.skeletons) != len(self.track_ids):
            raise ValueError("skeletons and track_ids must align")
        assigned = [t for t in self.track_ids if t is not None]
        if len(assigned) != len(set(assigned)):
            raise ValueError(f"duplicate track_id in frame {self.frame_index}")

    @property
    def people(self) -> tuple[tuple[Skeleton, Optional[int]], ...]:
        return tuple(zip(self.skeletons, self.track_ids))


@dataclass(frozen=True)
class Track:
    """One person's identity: their skeleton in every frame they appear in."""

    track_id: int
    frames: dict[int, Skeleton] = field(default_factory=dict)
    presence_ratio: float = 0.0

    def __post_init__(self):
        if self.track_id < 0:
            raise ValueError("track_id must be non-negative")
        if not 0.0 <= self.presence_ratio <= 1.0:
            raise ValueError("presence_ratio outside [0, 1]")

    def frame_indices(self) -> list[int]:
        return sorted(self.frames)


@dataclass(frozen=True)
class VideoGeometry:
    width: int
    height: int
    frame_count: int
    fps: float = 30.0

    def __post_init__(self):
        for name in ("width", "height", "frame_count", "fps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)


def centroid(
    skeleton: Skeleton, conf_threshold: float = DEFAULT_CONF_THRESHOLD
) -> Optional[tuple[float, float]]:
    """Mean (x, y) over keypoints at or above the confidence threshold.

    Returns None when no keypoint qualifies; sub-threshold keypoints never
    influence the result.
    """
    xs = []
    ys = []
    for kp in skeleton.keypoints:
        if kp.c >= conf_threshold:
            xs.append(kp.x)
            ys.append(kp.y)
    if not xs:
        return None
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def fallback_centroid(skeleton: Skeleton) -> Optional[tuple[float, float]]:
    """Mean over every detected keypoint, ignoring confidence.

    Used when no keypoint clears the confidence threshold but the person
    was still detected; None only for a fully undetected skeleton.
    """
    pts = [(kp.x, kp.y) for kp in skeleton.keypoints if kp.detected]
    if not pts:
        return None
    return (
        sum(p[0] for p in pts) / len(pts),
        sum(p[1] for p in pts) / len(pts),
    )


def tracks_from_frames(frames: list[FramePose], frame_count: Optional[int] = None) -> list[Track]:
    """Group tracked frames into per-person Tracks.

    ``frame_count`` defaults to len(frames) and is the denominator of
    presence_ratio.
    """
    total = frame_count if frame_count is not None else len(frames)
    by_id: dict[int, dict[int, Skeleton]] = {}
    for fp in frames:
        for skel, tid in fp.people:
            if tid is None:
                raise ContractError(f"frame {fp.frame_index} has an untracked person")
            by_id.setdefault(tid, {})[fp.frame_index] = skel
    return [
        Track(track_id=tid, frames=fr, presence_ratio=len(fr) / total if total else 0.0)
        for tid, fr in sorted(by_id.items())
    ]


def apply_tracks_to_frames(frames: list[FramePose], tracks: list[Track]) -> list[FramePose]:
    """Write per-track skeletons back into the frame structure.

    People keep their in-frame order; skeletons for (frame, track_id)
    pairs found in ``tracks`` are replaced, everything else is untouched.
    """
    by_id = {t.track_id: t for t in tracks}
    out = []
    for fp in frames:
        skels = []
        for skel, tid in fp.people:
            track = by_id.get(tid) if tid is not None else None
            if track is not None and fp.frame_index in track.frames:
                skel = track.frames[fp.frame_index]
            skels.append(skel)
        out.append(FramePose(fp.frame_index, tuple(skels), fp.track_ids))
    return out
