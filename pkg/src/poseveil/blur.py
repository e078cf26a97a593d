"""Face-region geometry and pixel-level blurring.

The face region is a square: its center is the per-axis median of the
five facial keypoints (median rather than mean so one misdetected ear
can't drag the box off the face), its side is one third of the spine
length (neck to mid-hip distance), following standard body proportions.
When the spine can't be measured in a frame the most recent side for
that track is reused, and failing that a quarter of the frame height --
a face is never left uncovered for lack of a spine measurement.

Rendering supports solid black fill (irreversible, the conservative
default) and Gaussian blurring with sigma = side/6, kernel truncated at
3 sigma, reflecting at the box edges so no pixel outside a box ever
changes. Box bounds are rounded outward: erring wide is erring safe.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InputError, RenderError
from .model import FACE_INDICES, MID_HIP, NECK, Skeleton, Track, VideoGeometry
from .pose_io import FrameStore

GAUSSIAN = "gaussian"
SOLID = "solid"

TARGET_PATIENT = "patient"
TARGET_ALL = "all"

SPINE_TO_FACE = 3.0          # face side = spine length / 3
FALLBACK_HEIGHT_FRACTION = 0.25
SIGMA_DIVISOR = 6.0
TRUNCATE_SIGMAS = 3.0


@dataclass(frozen=True)
class FaceBox:
    """Square blur region for one tracked face in one frame."""

    frame_index: int
    track_id: int
    cx: float
    cy: float
    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError("face box side must be positive")

    @property
    def box_id(self) -> str:
        return f"track{self.track_id}"


@dataclass(frozen=True)
class RenderBox:
    """What the renderer actually consumes: possibly rectangular (manual
    boxes), possibly carrying its own style."""

    frame_index: int
    box_id: str
    cx: float
    cy: float
    width: float
    height: float
    style: Optional[str] = None  # None = use the run's BlurSpec style


@dataclass(frozen=True)
class BlurSpec:
    targets: str                      # TARGET_PATIENT | TARGET_ALL
    style: str = SOLID                # GAUSSIAN | SOLID
    patient_id: Optional[int] = None  # required for TARGET_PATIENT

    def __post_init__(self):
        if self.targets not in (TARGET_PATIENT, TARGET_ALL):
            raise InputError(f"unknown blur target '{self.targets}'")
        if self.style not in (GAUSSIAN, SOLID):
            raise InputError(f"unknown blur style '{self.style}'")
        if self.targets == TARGET_PATIENT and self.patient_id is None:
            raise InputError("patient-only blurring needs a patient track id")


def face_box(skel: Skeleton, frame_index: int = 0, track_id: int = 0) -> Optional[FaceBox]:
    """Face box for one skeleton, or None when the spine (or any face
    point) is unavailable; fallback sizing is the caller's job."""
    face_pts = [skel[i] for i in FACE_INDICES if skel[i].detected]
    if not face_pts:
        return None
    cx = _median([kp.x for kp in face_pts])
    cy = _median([kp.y for kp in face_pts])

    neck, hip = skel[NECK], skel[MID_HIP]
    if not (neck.detected and hip.detected):
        return None
    spine = math.hypot(neck.x - hip.x, neck.y - hip.y)
    if spine <= 0:
        return None
    return FaceBox(frame_index, track_id, cx, cy, spine / SPINE_TO_FACE)


def _median(values: list[float]) -> float:
    s = sorted(values)
    n = len(s)
    mid = n // 2
    if n % 2:
        return s[mid]
    return (s[mid - 1] + s[mid]) / 2.0


def compute_face_boxes(tracks: list[Track], geom: VideoGeometry) -> list[FaceBox]:
    """Face boxes for every track in every frame it appears in.

    Frames where the spine can't be measured reuse the track's most
    recent side (looking backward first, then forward), else fall back to
    a quarter of the frame height. A frame with no detected facial points
    at all yields no box; interpolation is expected to have prevented
    that, so callers should treat the mismatch as an error.
    """
    boxes: list[FaceBox] = []
    for track in sorted(tracks, key=lambda t: t.track_id):
        per_frame: dict[int, Optional[FaceBox]] = {}
        centers: dict[int, tuple[float, float]] = {}
        for f in track.frame_indices():
            skel = track.frames[f]
            face_pts = [skel[i] for i in FACE_INDICES if skel[i].detected]
            if not face_pts:
                continue
            centers[f] = (
                _median([kp.x for kp in face_pts]),
                _median([kp.y for kp in face_pts]),
            )
            per_frame[f] = face_box(skel, f, track.track_id)

        known_sides = {f: b.side for f, b in per_frame.items() if b is not None}
        for f, center in sorted(centers.items()):
            b = per_frame.get(f)
            if b is None:
                side = _nearest_side(known_sides, f)
                if side is None:
                    side = FALLBACK_HEIGHT_FRACTION * geom.height
                b = FaceBox(f, track.track_id, center[0], center[1], side)
            boxes.append(b)
    return boxes


def _nearest_side(known: dict[int, float], frame: int) -> Optional[float]:
    if not known:
        return None
    past = [f for f in known if f < frame]
    if past:
        return known[max(past)]
    future = [f for f in known if f > frame]
    if future:
        return known[min(future)]
    return None


def select_boxes(boxes: Iterable[FaceBox], spec: BlurSpec) -> list[RenderBox]:
    """Filter computed boxes by blur target and lift them to RenderBoxes."""
    out = []
    for b in boxes:
        if spec.targets == TARGET_PATIENT and b.track_id != spec.patient_id:
            continue
        out.append(RenderBox(b.frame_index, b.box_id, b.cx, b.cy, b.side, b.side))
    return out


def pixel_bounds(
    box: RenderBox, width: int, height: int
) -> Optional[tuple[int, int, int, int]]:
    """Half-open pixel bounds (x0, x1, y0, y1), rounded outward and
    clipped to the frame; None when the box misses the frame entirely."""
    x0 = max(0, math.floor(box.cx - box.width / 2.0))
    x1 = min(width, math.ceil(box.cx + box.width / 2.0))
    y0 = max(0, math.floor(box.cy - box.height / 2.0))
    y1 = min(height, math.ceil(box.cy + box.height / 2.0))
    if x0 >= x1 or y0 >= y1:
        return None
    return x0, x1, y0, y1


def render_frame(
    pixels: np.ndarray, boxes: Iterable[RenderBox], default_style: str
) -> np.ndarray:
    """Apply every box to a copy of one frame; pixels outside all boxes
    are bit-identical to the input."""
    out = pixels.copy()
    height, width = out.shape[:2]
    for box in boxes:
        if box.width <= 0 or box.height <= 0:
            continue  # degenerate, skipped (callers warn)
        bounds = pixel_bounds(box, width, height)
        if bounds is None:
            continue
        x0, x1, y0, y1 = bounds
        style = box.style or default_style
        if style == SOLID:
            out[y0:y1, x0:x1] = 0
        else:
            sigma = min(box.width, box.height) / SIGMA_DIVISOR
            region = out[y0:y1, x0:x1].astype(np.float64)
            blurred = gaussian_filter(
                region, sigma=(sigma, sigma, 0), truncate=TRUNCATE_SIGMAS, mode="reflect"
            )
            out[y0:y1, x0:x1] = np.rint(blurred).clip(0, 255).astype(np.uint8)
    return out


def render(
    frames: FrameStore,
    boxes: Iterable[RenderBox],
    spec: BlurSpec,
    out_dir: str | Path,
) -> list[str]:
    """Render blurred copies of every frame into out_dir.

    Frames without boxes are copied pixel-identically. Returns warnings
    (degenerate boxes, if any).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    warnings: list[str] = []
    by_frame: dict[int, list[RenderBox]] = {}
    for b in boxes:
        if b.width <= 0 or b.height <= 0:
            warnings.append(f"frame {b.frame_index}: degenerate box {b.box_id} skipped")
            continue
        if not 0 <= b.frame_index < frames.geometry.frame_count:
            raise RenderError(f"box {b.box_id} references missing frame {b.frame_index}")
        by_frame.setdefault(b.frame_index, []).append(b)

    out_store = FrameStore(directory=out_dir, geometry=frames.geometry)
    for idx in range(frames.geometry.frame_count):
        img = frames.load_frame(idx)
        rendered = render_frame(img, by_frame.get(idx, ()), spec.style)
        out_store.save_frame(idx, rendered)
    return warnings


def write_box_sidecar(path: str | Path, boxes: list[FaceBox]) -> None:
    """Per-frame face-box records for audit and re-rendering."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "track_id", "cx", "cy", "side"])
        for b in sorted(boxes, key=lambda b: (b.frame_index, b.track_id)):
            writer.writerow([b.frame_index, b.track_id, repr(b.cx), repr(b.cy), repr(b.side)])


def load_box_sidecar(path: str | Path) -> list[FaceBox]:
    boxes = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["frame", "track_id", "cx", "cy", "side"]:
            raise InputError(f"{path}: unexpected face-box header {reader.fieldnames}")
        for row in reader:
            boxes.append(
                FaceBox(
                    int(row["frame"]),
                    int(row["track_id"]),
                    float(row["cx"]),
                    float(row["cy"]),
                    float(row["side"]),
                )
            )
    return boxes
