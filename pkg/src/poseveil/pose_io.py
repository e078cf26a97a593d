"""Reading and writing per-frame keypoint files and decoded frame images.

Keypoint files follow the upstream pose estimator's layout: one JSON file
per frame named ``<stem>_%012d_keypoints.json`` with a top-level "people"
list, each person holding a flat 75-number "pose_keypoints_2d" array.
This module adds a per-person "track_id" integer on write, plus an
optional "interpolated" list naming repaired keypoint indices so that
written files load back into an identical model.

Frames are consumed as a numbered PNG sequence ``frame_%06d.png`` with
uniform dimensions; producing that sequence from a video container is the
job of an external transcoding tool (see project.standardize).
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import ContractError, GeometryError, InputError, ParseError, SchemaError
from .model import NUM_KEYPOINTS, FramePose, Keypoint, Skeleton, VideoGeometry

KEYPOINT_FILE_RE = re.compile(r"^(?P<stem>.*)_(?P<index>\d{12})_keypoints\.json$")
FRAME_FILE_RE = re.compile(r"^frame_(?P<index>\d{6})\.png$")

KEYPOINT_FILE_PATTERN = "{stem}_{index:012d}_keypoints.json"
FRAME_FILE_PATTERN = "frame_{index:06d}.png"


def format_float(value: float) -> str:
    """Fixed, lossless float formatting for keypoint files.

    Prefers at most 6 decimal places (the upstream estimator's own
    precision); falls back to the full shortest repr whenever truncation
    would not parse back to the exact value, so write→load always
    round-trips.
    """
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("keypoint values must be finite")
    short = f"{value:.6f}".rstrip("0").rstrip(".")
    if short in ("", "-0"):
        short = "0"
    if float(short) == value:
        return short
    return repr(value)


@dataclass
class GapReport:
    """Frame indices missing from an otherwise contiguous numbering."""

    first_index: int
    last_index: int
    missing: list[int] = field(default_factory=list)

    @property
    def has_gaps(self) -> bool:
        return bool(self.missing)


@dataclass
class PoseFileSet:
    directory: Path
    files: list[Path]          # ordered by frame index
    indices: list[int]
    stem: str

    @property
    def frame_count(self) -> int:
        return len(self.files)


@dataclass
class FrameStore:
    """Directory of numbered, identically sized frame images."""

    directory: Path
    geometry: VideoGeometry

    def __post_init__(self):
        self.directory = Path(self.directory)

    def frame_path(self, index: int) -> Path:
        return self.directory / FRAME_FILE_PATTERN.format(index=index)

    def load_frame(self, index: int) -> np.ndarray:
        path = self.frame_path(index)
        if not path.exists():
            raise GeometryError(f"frame {index} missing from {self.directory}")
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))

    def save_frame(self, index: int, pixels: np.ndarray) -> Path:
        path = self.frame_path(index)
        Image.fromarray(pixels.astype(np.uint8), mode="RGB").save(path)
        return path


def scan_pose_dir(directory: str | Path) -> PoseFileSet:
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"keypoint directory does not exist: {directory}")
    entries = []
    stem = None
    for name in sorted(os.listdir(directory)):
        m = KEYPOINT_FILE_RE.match(name)
        if not m:
            continue
        idx = int(m.group("index"))
        stem = m.group("stem")
        entries.append((idx, directory / name))
    if not entries:
        raise InputError(f"no keypoint files in {directory}")
    entries.sort()
    indices = [idx for idx, _ in entries]
    if len(set(indices)) != len(indices):
        dupes = sorted({i for i in indices if indices.count(i) > 1})
        raise InputError(f"duplicate frame indices in {directory}: {dupes}")
    return PoseFileSet(
        directory=directory,
        files=[p for _, p in entries],
        indices=indices,
        stem=stem or "",
    )


def _decode_person(raw: dict, path: Path, person_idx: int) -> tuple[Skeleton, Optional[int]]:
    flat = raw.get("pose_keypoints_2d")
    if not isinstance(flat, list) or len(flat) != NUM_KEYPOINTS * 3:
        got = len(flat) if isinstance(flat, list) else type(flat).__name__
        raise SchemaError(
            f"{path}: person {person_idx} pose_keypoints_2d must hold "
            f"{NUM_KEYPOINTS * 3} numbers, got {got}"
        )
    interpolated = set(raw.get("interpolated", []))
    kps = []
    for i in range(NUM_KEYPOINTS):
        x, y, c = flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]
        try:
            kps.append(Keypoint(float(x), float(y), float(c), interpolated=i in interpolated))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: person {person_idx} keypoint {i}: {exc}") from exc
    track_id = raw.get("track_id")
    if track_id is not None and (not isinstance(track_id, int) or track_id < 0):
        raise SchemaError(f"{path}: person {person_idx} track_id must be a non-negative integer")
    return Skeleton(tuple(kps)), track_id


def load_pose_files(
    directory: str | Path,
    allow_gaps: bool = False,
    expected_frame_count: Optional[int] = None,
) -> tuple[list[FramePose], GapReport]:
    """Load one FramePose per keypoint file, in frame order.

    Gaps in the numbering are an error by default; with ``allow_gaps``
    they are only reported. ``expected_frame_count`` cross-checks the file
    count against known video geometry.
    """
    fileset = scan_pose_dir(directory)
    indices = fileset.indices
    missing = sorted(set(range(indices[0], indices[-1] + 1)) - set(indices))
    report = GapReport(first_index=indices[0], last_index=indices[-1], missing=missing)
    if missing and not allow_gaps:
        raise InputError(
            f"{directory}: missing frame indices {missing[:10]}"
            f"{'...' if len(missing) > 10 else ''} (pass allow_gaps to continue)"
        )
    if expected_frame_count is not None and len(indices) != expected_frame_count:
        raise InputError(
            f"{directory}: {len(indices)} keypoint files but video has "
            f"{expected_frame_count} frames"
        )

    frames = []
    for idx, path in zip(fileset.indices, fileset.files):
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON at offset {exc.pos}: {exc.msg}") from exc
        people = data.get("people")
        if not isinstance(people, list):
            raise SchemaError(f"{path}: top-level 'people' list missing")
        skels = []
        tids = []
        for p_idx, person in enumerate(people):
            skel, tid = _decode_person(person, path, p_idx)
            skels.append(skel)
            tids.append(tid)
        frames.append(FramePose(idx, tuple(skels), tuple(tids)))
    return frames, report


def _encode_person(skel: Skeleton, track_id: int) -> str:
    flat = []
    interp = []
    for i, kp in enumerate(skel.keypoints):
        flat.extend((format_float(kp.x), format_float(kp.y), format_float(kp.c)))
        if kp.interpolated:
            interp.append(i)
    parts = [f'"track_id":{track_id}', f'"pose_keypoints_2d":[{",".join(flat)}]']
    if interp:
        parts.append(f'"interpolated":[{",".join(str(i) for i in interp)}]')
    return "{" + ",".join(parts) + "}"


def write_pose_files(
    frames: list[FramePose], directory: str | Path, stem: str
) -> list[Path]:
    """Write tracked frames back out, one file per frame.

    Output is byte-stable across runs: keys in canonical order, floats
    through format_float. Every person must carry a track_id.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {directory}: {exc}") from exc
    written = []
    for fp in frames:
        people = []
        for p_idx, (skel, tid) in enumerate(fp.people):
            if tid is None:
                raise ContractError(
                    f"frame {fp.frame_index} person {p_idx} has no track_id; run tracking first"
                )
            people.append(_encode_person(skel, tid))
        body = '{"people":[' + ",".join(people) + "]}"
        path = directory / KEYPOINT_FILE_PATTERN.format(stem=stem, index=fp.frame_index)
        try:
            path.write_text(body + "\n", encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written


def load_frames(directory: str | Path, fps: float = 30.0) -> FrameStore:
    """Validate a decoded-frame directory and derive its geometry.

    Every index in [0, n) must resolve to exactly one PNG and all images
    must share the same dimensions.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"frame directory does not exist: {directory}")
    indexed = {}
    for name in sorted(os.listdir(directory)):
        m = FRAME_FILE_RE.match(name)
        if m:
            indexed[int(m.group("index"))] = directory / name
    if not indexed:
        raise InputError(f"no frame images in {directory}")
    count = max(indexed) + 1
    missing = sorted(set(range(count)) - set(indexed))
    if missing:
        raise GeometryError(f"{directory}: missing frame indices {missing[:10]}")

    size = None
    for idx in range(count):
        with Image.open(indexed[idx]) as img:
            if size is None:
                size = img.size
            elif img.size != size:
                raise GeometryError(
                    f"{directory}: frame {idx} is {img.size[0]}x{img.size[1]}, "
                    f"expected {size[0]}x{size[1]}"
                )
    geom = VideoGeometry(width=size[0], height=size[1], frame_count=count, fps=fps)
    return FrameStore(directory=directory, geometry=geom)


def find_metadata(search_dir: str | Path, stem: str, exclude: tuple[str, ...] = ()) -> list[Path]:
    """Files sharing the video's stem with a different extension.

    This is how per-patient metadata gets linked to a video without any
    manual bookkeeping.
    """
    search_dir = Path(search_dir)
    if not search_dir.is_dir():
        return []
    out = []
    for entry in sorted(search_dir.iterdir()):
        if not entry.is_file():
            continue
        if entry.stem == stem and entry.name not in exclude:
            out.append(entry)
    return out
