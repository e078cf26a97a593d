"""Small factories shared across the test modules."""

from __future__ import annotations

from poseveil.model import NUM_KEYPOINTS, FramePose, Keypoint, Skeleton, Track

ZERO = Keypoint(0.0, 0.0, 0.0)


def skel(points: dict[int, tuple] | None = None, fill=None) -> Skeleton:
    """Skeleton with the given {index: (x, y, c)} entries; the rest are
    undetected unless ``fill`` gives a default (x, y, c)."""
    base = Keypoint(*fill) if fill else ZERO
    kps = [base] * NUM_KEYPOINTS
    for idx, (x, y, c) in (points or {}).items():
        kps[idx] = Keypoint(float(x), float(y), float(c))
    return Skeleton(tuple(kps))


def uniform_skel(x: float, y: float, c: float = 0.9) -> Skeleton:
    return Skeleton(tuple(Keypoint(x, y, c) for _ in range(NUM_KEYPOINTS)))


def frame(index: int, *skeletons: Skeleton, track_ids=None) -> FramePose:
    if track_ids is None:
        track_ids = (None,) * len(skeletons)
    return FramePose(index, tuple(skeletons), tuple(track_ids))


def track_from(skeletons: dict[int, Skeleton], track_id: int = 0, total: int | None = None) -> Track:
    total = total if total is not None else (max(skeletons) + 1 if skeletons else 1)
    return Track(track_id=track_id, frames=dict(skeletons), presence_ratio=len(skeletons) / total)
