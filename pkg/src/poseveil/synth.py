"""Deterministic synthetic scenes: walkers, pose files and frame images.

Used by the test suite (property suites run on thousands of generated
scenes) and by the bundled demo fixture. Skeletons are built from a
proportioned 25-point template positioned by the neck, scaled by spine
length, with optional Gaussian positional noise and keypoint dropout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .model import (
    FACE_INDICES,
    MID_HIP,
    NECK,
    NUM_KEYPOINTS,
    FramePose,
    Keypoint,
    Skeleton,
    Track,
    VideoGeometry,
)
from .pose_io import KEYPOINT_FILE_PATTERN, FrameStore, format_float

# (x, y) offsets per BODY_25 index, in spine units, neck at the origin,
# y growing downward.
BODY_TEMPLATE = np.array(
    [
        (0.00, -0.25),   # nose
        (0.00, 0.00),    # neck
        (-0.18, 0.02),   # r shoulder
        (-0.24, 0.28),   # r elbow
        (-0.26, 0.52),   # r wrist
        (0.18, 0.02),    # l shoulder
        (0.24, 0.28),    # l elbow
        (0.26, 0.52),    # l wrist
        (0.00, 1.00),    # mid hip
        (-0.10, 1.00),   # r hip
        (-0.11, 1.45),   # r knee
        (-0.12, 1.88),   # r ankle
        (0.10, 1.00),    # l hip
        (0.11, 1.45),    # l knee
        (0.12, 1.88),    # l ankle
        (-0.05, -0.30),  # r eye
        (0.05, -0.30),   # l eye
        (-0.10, -0.27),  # r ear
        (0.10, -0.27),   # l ear
        (0.13, 1.97),    # l big toe
        (0.16, 1.96),    # l small toe
        (0.11, 1.90),    # l heel
        (-0.13, 1.97),   # r big toe
        (-0.16, 1.96),   # r small toe
        (-0.12, 1.90),   # r heel
    ]
)


def make_skeleton(
    neck_x: float,
    neck_y: float,
    spine: float,
    rng: Optional[np.random.Generator] = None,
    noise_sigma: float = 0.0,
    dropout: float = 0.0,
    conf_lo: float = 0.6,
    conf_hi: float = 0.99,
    protected: tuple[int, ...] = (),
) -> Skeleton:
    """One skeleton at the given neck position; ``protected`` indices are
    never dropped (used when a test needs the spine always measurable)."""
    pts = BODY_TEMPLATE * spine + np.array([neck_x, neck_y])
    if rng is not None and noise_sigma > 0:
        pts = pts + rng.normal(0.0, noise_sigma, size=pts.shape)
    if rng is not None:
        confs = rng.uniform(conf_lo, conf_hi, size=NUM_KEYPOINTS)
        drops = rng.random(NUM_KEYPOINTS) < dropout
    else:
        confs = np.full(NUM_KEYPOINTS, (conf_lo + conf_hi) / 2.0)
        drops = np.zeros(NUM_KEYPOINTS, dtype=bool)
    kps = []
    for i in range(NUM_KEYPOINTS):
        if drops[i] and i not in protected:
            kps.append(Keypoint(0.0, 0.0, 0.0))
        else:
            kps.append(Keypoint(float(pts[i, 0]), float(pts[i, 1]), float(confs[i])))
    return Skeleton(tuple(kps))


@dataclass
class Walker:
    """A person moving linearly across a range of frames."""

    neck_start: tuple[float, float]
    velocity: tuple[float, float]
    spine: float
    present: set[int] = field(default_factory=set)

    def neck_at(self, frame: int) -> tuple[float, float]:
        return (
            self.neck_start[0] + self.velocity[0] * frame,
            self.neck_start[1] + self.velocity[1] * frame,
        )


def walkers_to_frames(
    walkers: list[Walker],
    n_frames: int,
    rng: Optional[np.random.Generator] = None,
    noise_sigma: float = 0.0,
    dropout: float = 0.0,
    shuffle: bool = False,
    protected: tuple[int, ...] = (),
) -> tuple[list[FramePose], list[list[int]]]:
    """Frames plus, per frame, the walker index behind each person entry.

    ``shuffle`` randomizes the in-file person order so tests can confirm
    assignment does not depend on it.
    """
    frames = []
    origin: list[list[int]] = []
    for f in range(n_frames):
        entries = [w_idx for w_idx, w in enumerate(walkers) if f in w.present]
        if shuffle and rng is not None and len(entries) > 1:
            entries = [entries[i] for i in rng.permutation(len(entries))]
        skels = []
        for w_idx in entries:
            w = walkers[w_idx]
            nx, ny = w.neck_at(f)
            skels.append(
                make_skeleton(
                    nx, ny, w.spine, rng, noise_sigma, dropout, protected=protected
                )
            )
        frames.append(FramePose(f, tuple(skels), (None,) * len(skels)))
        origin.append(entries)
    return frames, origin


def lane_walkers(
    rng: np.random.Generator,
    n_walkers: int,
    geom: VideoGeometry,
    n_frames: int,
    max_speed: float = 2.0,
) -> list[Walker]:
    """Non-crossing walkers in evenly spaced vertical lanes.

    Lane spacing is far wider than any possible per-frame displacement,
    so centroids never collide.
    """
    margin = geom.width / (n_walkers + 1)
    walkers = []
    for i in range(n_walkers):
        lane_x = margin * (i + 1) + rng.uniform(-margin * 0.1, margin * 0.1)
        start_y = rng.uniform(geom.height * 0.2, geom.height * 0.4)
        vx = rng.uniform(-0.3, 0.3)
        vy = rng.uniform(-max_speed, max_speed)
        # keep the walker inside the frame for the whole clip
        end_y = start_y + vy * n_frames
        if end_y < geom.height * 0.1 or end_y > geom.height * 0.75:
            vy = -vy
        walkers.append(
            Walker(
                neck_start=(lane_x, start_y),
                velocity=(vx, vy),
                spine=rng.uniform(70.0, 100.0),
                present=set(range(n_frames)),
            )
        )
    return walkers


def walkers_to_tracks(
    walkers: list[Walker],
    n_frames: int,
    rng: Optional[np.random.Generator] = None,
    noise_sigma: float = 0.0,
) -> list[Track]:
    """Direct walker->Track conversion, bypassing the tracker (for tests
    of downstream stages)."""
    tracks = []
    for tid, w in enumerate(walkers):
        frames = {}
        for f in sorted(w.present):
            if f >= n_frames:
                continue
            nx, ny = w.neck_at(f)
            frames[f] = make_skeleton(nx, ny, w.spine, rng, noise_sigma)
        tracks.append(Track(track_id=tid, frames=frames, presence_ratio=len(frames) / n_frames))
    return tracks


# ---------------------------------------------------------------------------
# the bundled demo fixture: frames on disk + raw (untracked) pose files


def _draw_disk(img: np.ndarray, cx: float, cy: float, radius: float, color) -> None:
    h, w = img.shape[:2]
    y0, y1 = max(0, int(cy - radius) - 1), min(h, int(cy + radius) + 2)
    x0, x1 = max(0, int(cx - radius) - 1), min(w, int(cx + radius) + 2)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    img[y0:y1, x0:x1][mask] = color


def _draw_rect(img: np.ndarray, cx: float, cy: float, w_: float, h_: float, color) -> None:
    h, w = img.shape[:2]
    x0, x1 = max(0, int(cx - w_ / 2)), min(w, int(cx + w_ / 2))
    y0, y1 = max(0, int(cy - h_ / 2)), min(h, int(cy + h_ / 2))
    if x0 < x1 and y0 < y1:
        img[y0:y1, x0:x1] = color


def render_scene_frame(geom: VideoGeometry, skeletons: list[Skeleton]) -> np.ndarray:
    """A synthetic clinic frame: gradient background plus simple body and
    head shapes at each skeleton's position, so blurring visibly changes
    pixels."""
    xs = np.linspace(60, 180, geom.width, dtype=np.float64)
    ys = np.linspace(40, 120, geom.height, dtype=np.float64)
    img = np.zeros((geom.height, geom.width, 3), dtype=np.uint8)
    img[:, :, 0] = xs[None, :].astype(np.uint8)
    img[:, :, 1] = ys[:, None].astype(np.uint8)
    img[:, :, 2] = ((xs[None, :] + ys[:, None]) / 2).astype(np.uint8)

    colors = [(210, 170, 140), (150, 190, 230), (190, 220, 160), (230, 180, 200)]
    for i, skel in enumerate(skeletons):
        neck, hip = skel[NECK], skel[MID_HIP]
        if not (neck.detected and hip.detected):
            continue
        spine = math.hypot(neck.x - hip.x, neck.y - hip.y)
        color = colors[i % len(colors)]
        # torso
        _draw_rect(img, (neck.x + hip.x) / 2, (neck.y + hip.y) / 2, spine * 0.5, spine, color)
        # head at the facial centroid
        face_pts = [skel[j] for j in FACE_INDICES if skel[j].detected]
        if face_pts:
            fx = sorted(p.x for p in face_pts)[len(face_pts) // 2]
            fy = sorted(p.y for p in face_pts)[len(face_pts) // 2]
            _draw_disk(img, fx, fy, spine / 5.5, color)
            _draw_disk(img, fx - spine / 18, fy - spine / 30, spine / 28, (30, 30, 30))
            _draw_disk(img, fx + spine / 18, fy - spine / 30, spine / 28, (30, 30, 30))
    return img


def write_raw_pose_files(
    frames: list[FramePose], directory: str | Path, stem: str
) -> list[Path]:
    """Pose files the way the upstream estimator writes them: no track
    IDs, person_id fixed at -1."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for fp in frames:
        people = []
        for skel in fp.skeletons:
            flat = []
            for kp in skel.keypoints:
                flat.extend((format_float(kp.x), format_float(kp.y), format_float(kp.c)))
            people.append(
                '{"person_id":[-1],"pose_keypoints_2d":[' + ",".join(flat) + "]}"
            )
        body = '{"version":1.3,"people":[' + ",".join(people) + "]}"
        path = directory / KEYPOINT_FILE_PATTERN.format(stem=stem, index=fp.frame_index)
        path.write_text(body + "\n", encoding="utf-8")
        written.append(path)
    return written


def build_fixture(
    root: str | Path,
    stem: str = "clinic01",
    n_frames: int = 60,
    seed: int = 20240,
) -> Path:
    """The bundled demo input: one synthetic 60-frame clinic visit.

    Walker 0 stays near the frame center (the patient), walker 1 walks
    near the left edge. Writes <root>/<stem>_poses/, <root>/<stem>_frames/
    and a metadata sidecar <root>/<stem>.txt; returns the root.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    geom = VideoGeometry(width=640, height=360, frame_count=n_frames, fps=30.0)

    patient = Walker(
        neck_start=(geom.width / 2 - 12.0, 110.0),
        velocity=(0.4, 0.6),
        spine=88.0,
        present=set(range(n_frames)),
    )
    staff = Walker(
        neck_start=(86.0, 96.0),
        velocity=(0.2, 0.3),
        spine=80.0,
        present=set(range(n_frames)),
    )
    # spine endpoints stay measurable so every face box derives from the
    # spine rule; everything else may drop out and exercise interpolation
    frames, _ = walkers_to_frames(
        [patient, staff],
        n_frames,
        rng=rng,
        noise_sigma=1.0,
        dropout=0.04,
        protected=(NECK, MID_HIP),
    )

    pose_dir = root / f"{stem}_poses"
    frames_dir = root / f"{stem}_frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    write_raw_pose_files(frames, pose_dir, stem)
    store = FrameStore(directory=frames_dir, geometry=geom)
    for fp in frames:
        store.save_frame(fp.frame_index, render_scene_frame(geom, list(fp.skeletons)))
    (root / f"{stem}.txt").write_text("synthetic demo visit, no real patient data\n")
    return root
