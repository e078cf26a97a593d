"""Project lifecycle: configuration, the step pipeline, and data export.

A project is a directory holding a human-readable config, an append-only
log, and per-video artifact directories. Every pipeline step reads its
inputs from disk and persists its outputs before the step is marked
complete, so an interrupted run resumes exactly where it stopped and
produces byte-identical results to an uninterrupted one.

Rendered video never leaves the project tree until the quality check has
been signed off (through the review service) or explicitly skipped.
"""

from __future__ import annotations

import json
import shlex
import shutil
import subprocess
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import blur, interpolation, patient, pose_io, tracking
from .errors import (
    ConflictError,
    InputError,
    NoPatientError,
    NotFoundError,
    NotReadyError,
    PoseVeilError,
    PrivacyGuardError,
    StepError,
)
from .model import (
    FramePose,
    Track,
    VideoGeometry,
    apply_tracks_to_frames,
    tracks_from_frames,
)
from .overrides import load_override_set, apply_overrides
from .pose_io import format_float

STEPS = ["standardize", "load", "track", "interpolate", "identify", "boxes", "render"]

QC_PENDING = "pending"
QC_SIGNED_OFF = "signed_off"
QC_SKIPPED = "skipped"

EXPORT_BLURRED = "blurred"
EXPORT_BACKUP = "backup"
EXPORT_KEYPOINTS_JSON = "keypoints-json"
EXPORT_KEYPOINTS_CSV = "keypoints-csv"
EXPORT_KINDS = (EXPORT_BLURRED, EXPORT_BACKUP, EXPORT_KEYPOINTS_JSON, EXPORT_KEYPOINTS_CSV)


@dataclass
class Settings:
    track_threshold: float = 0.15
    interp_scope: str = interpolation.FACE_ONLY
    interp_threshold: float = 0.5
    presence_threshold: float = 0.8
    blur_targets: str = blur.TARGET_PATIENT
    blur_style: str = blur.SOLID
    allow_gaps: bool = False
    fps: float = 30.0
    # subprocess template for the external transcoder, e.g.
    # "ffmpeg -i {video} -an {frames_dir}/frame_%06d.png"
    transcode_command: Optional[str] = None


@dataclass
class VideoEntry:
    stem: str
    pose_dir: str
    frames_dir: str
    video_path: Optional[str] = None
    metadata: list[str] = field(default_factory=list)


@dataclass
class ProjectConfig:
    name: str
    videos: list[VideoEntry]
    settings: Settings = field(default_factory=Settings)
    ledger: dict[str, dict[str, str]] = field(default_factory=dict)
    quality: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectConfig":
        return cls(
            name=data["name"],
            videos=[VideoEntry(**v) for v in data["videos"]],
            settings=Settings(**data.get("settings", {})),
            ledger={k: dict(v) for k, v in data.get("ledger", {}).items()},
            quality=dict(data.get("quality", {})),
        )


class Project:
    """A project directory plus its loaded configuration."""

    def __init__(self, directory: Path, config: ProjectConfig):
        self.directory = Path(directory)
        self.config = config

    # -- paths ---------------------------------------------------------

    @property
    def config_path(self) -> Path:
        return self.directory / "config.json"

    @property
    def log_path(self) -> Path:
        return self.directory / "project.log"

    def video_dir(self, stem: str) -> Path:
        return self.directory / "videos" / stem

    def tracked_dir(self, stem: str) -> Path:
        return self.video_dir(stem) / "tracked"

    def interpolated_dir(self, stem: str) -> Path:
        return self.video_dir(stem) / "interpolated"

    def rendered_dir(self, stem: str) -> Path:
        return self.video_dir(stem) / "rendered"

    def reports_dir(self, stem: str) -> Path:
        return self.video_dir(stem) / "reports"

    def boxes_path(self, stem: str) -> Path:
        return self.video_dir(stem) / "face_boxes.csv"

    def overrides_path(self, stem: str) -> Path:
        return self.video_dir(stem) / "overrides.json"

    def entry(self, stem: str) -> VideoEntry:
        for v in self.config.videos:
            if v.stem == stem:
                return v
        raise NotFoundError(f"no video '{stem}' in project '{self.config.name}'")

    # -- persistence ---------------------------------------------------

    def save(self) -> None:
        self.config_path.write_text(
            json.dumps(self.config.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def log(self, message: str) -> None:
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(f"{stamp} {message}\n")

    # -- ledger --------------------------------------------------------

    def step_done(self, stem: str, step: str) -> bool:
        return step in self.config.ledger.get(stem, {})

    def mark_step(self, stem: str, step: str) -> None:
        self.config.ledger.setdefault(stem, {})[step] = time.strftime("%Y-%m-%dT%H:%M:%S")
        self.save()
        self.log(f"{stem}: completed step '{step}'")

    def quality_state(self, stem: str) -> str:
        return self.config.quality.get(stem, QC_PENDING)

    def sign_off(self, stem: str) -> None:
        if not self.step_done(stem, "render"):
            raise NotReadyError(f"'{stem}' has no rendered output to review yet")
        self.config.quality[stem] = QC_SIGNED_OFF
        self.save()
        self.log(f"{stem}: quality check signed off")

    # -- geometry ------------------------------------------------------

    def geometry(self, stem: str) -> VideoGeometry:
        path = self.reports_dir(stem) / "geometry.json"
        if path.exists():
            data = json.loads(path.read_text(encoding="utf-8"))
            return VideoGeometry(**data)
        store = pose_io.load_frames(self.entry(stem).frames_dir, fps=self.config.settings.fps)
        return store.geometry

    # -- steps ---------------------------------------------------------

    def _step_standardize(self, stem: str) -> None:
        entry = self.entry(stem)
        frames_dir = Path(entry.frames_dir)
        cmd = self.config.settings.transcode_command
        if cmd and entry.video_path and not frames_dir.is_dir():
            frames_dir.mkdir(parents=True, exist_ok=True)
            rendered_cmd = cmd.format(video=entry.video_path, frames_dir=str(frames_dir))
            result = subprocess.run(shlex.split(rendered_cmd), capture_output=True, text=True)
            if result.returncode != 0:
                raise InputError(
                    f"transcoder failed ({result.returncode}): {result.stderr.strip()[:500]}"
                )
        store = pose_io.load_frames(frames_dir, fps=self.config.settings.fps)
        self.reports_dir(stem).mkdir(parents=True, exist_ok=True)
        (self.reports_dir(stem) / "geometry.json").write_text(
            json.dumps(asdict(store.geometry), indent=2) + "\n", encoding="utf-8"
        )

    def _step_load(self, stem: str) -> None:
        entry = self.entry(stem)
        geom = self.geometry(stem)
        frames, gaps = pose_io.load_pose_files(
            entry.pose_dir,
            allow_gaps=self.config.settings.allow_gaps,
            expected_frame_count=None if self.config.settings.allow_gaps else geom.frame_count,
        )
        report = {
            "frames": len(frames),
            "people_total": sum(len(f.skeletons) for f in frames),
            "missing_frames": gaps.missing,
        }
        (self.reports_dir(stem) / "load.json").write_text(
            json.dumps(report, indent=2) + "\n", encoding="utf-8"
        )

    def _step_track(self, stem: str) -> None:
        entry = self.entry(stem)
        geom = self.geometry(stem)
        frames, _ = pose_io.load_pose_files(entry.pose_dir, allow_gaps=self.config.settings.allow_gaps)
        tracked, tracks, events = tracking.assign_ids(
            frames, geom, self.config.settings.track_threshold
        )
        pose_io.write_pose_files(tracked, self.tracked_dir(stem), stem)
        tracking.write_tracking_report(self.reports_dir(stem) / "tracking.json", tracks, events)

    def _step_interpolate(self, stem: str) -> None:
        frames, _ = pose_io.load_pose_files(self.tracked_dir(stem), allow_gaps=True)
        tracks = tracks_from_frames(frames, frame_count=self.geometry(stem).frame_count)
        repaired, report = interpolation.interpolate_tracks(
            tracks,
            scope=self.config.settings.interp_scope,
            conf_threshold=self.config.settings.interp_threshold,
        )
        out = apply_tracks_to_frames(frames, repaired)
        pose_io.write_pose_files(out, self.interpolated_dir(stem), stem)
        interpolation.write_repair_report(self.reports_dir(stem) / "interpolation.json", report)

    def _load_interpolated_tracks(self, stem: str) -> list[Track]:
        frames, _ = pose_io.load_pose_files(self.interpolated_dir(stem), allow_gaps=True)
        return tracks_from_frames(frames, frame_count=self.geometry(stem).frame_count)

    def _step_identify(self, stem: str) -> None:
        tracks = self._load_interpolated_tracks(stem)
        geom = self.geometry(stem)
        try:
            patient_id, scores = patient.identify_patient(
                tracks, geom, self.config.settings.presence_threshold
            )
        except NoPatientError:
            if self.config.settings.blur_targets == blur.TARGET_PATIENT:
                raise NoPatientError(
                    "no track passes the presence filter; re-run with all-person "
                    "blurring (--targets all) or review the tracking report"
                )
            patient_id, scores = None, []
        patient.write_score_report(self.reports_dir(stem) / "patient.json", patient_id, scores)

    def patient_id(self, stem: str) -> Optional[int]:
        path = self.reports_dir(stem) / "patient.json"
        if not path.exists():
            raise NotReadyError(f"'{stem}' has not run patient identification yet")
        return json.loads(path.read_text(encoding="utf-8"))["patient_track_id"]

    def _step_boxes(self, stem: str) -> None:
        tracks = self._load_interpolated_tracks(stem)
        geom = self.geometry(stem)
        boxes = blur.compute_face_boxes(tracks, geom)
        # privacy check: every appearance of every track must have a box
        boxed = {(b.frame_index, b.track_id) for b in boxes}
        for t in tracks:
            for f in t.frames:
                if (f, t.track_id) not in boxed:
                    raise PoseVeilError(
                        f"track {t.track_id} has no face box in frame {f}; "
                        f"its face cannot be located"
                    )
        blur.write_box_sidecar(self.boxes_path(stem), boxes)

    def blur_spec(self, stem: str) -> blur.BlurSpec:
        targets = self.config.settings.blur_targets
        pid = self.patient_id(stem) if targets == blur.TARGET_PATIENT else None
        return blur.BlurSpec(targets=targets, style=self.config.settings.blur_style, patient_id=pid)

    def effective_boxes(self, stem: str) -> list[blur.RenderBox]:
        face_boxes = blur.load_box_sidecar(self.boxes_path(stem))
        selected = blur.select_boxes(face_boxes, self.blur_spec(stem))
        return apply_overrides(selected, load_override_set(self.overrides_path(stem)))

    def _step_render(self, stem: str) -> None:
        entry = self.entry(stem)
        store = pose_io.FrameStore(directory=Path(entry.frames_dir), geometry=self.geometry(stem))
        warnings = blur.render(
            store, self.effective_boxes(stem), self.blur_spec(stem), self.rendered_dir(stem)
        )
        for w in warnings:
            self.log(f"{stem}: {w}")

    _STEP_RUNNERS = {
        "standardize": _step_standardize,
        "load": _step_load,
        "track": _step_track,
        "interpolate": _step_interpolate,
        "identify": _step_identify,
        "boxes": _step_boxes,
        "render": _step_render,
    }

    def run_step(self, stem: str, step: str) -> None:
        self.video_dir(stem).mkdir(parents=True, exist_ok=True)
        self.reports_dir(stem).mkdir(parents=True, exist_ok=True)
        try:
            self._STEP_RUNNERS[step](self, stem)
        except PoseVeilError as exc:
            self.log(f"{stem}: step '{step}' failed: {exc}")
            raise StepError(step, f"{exc} (partial outputs under {self.video_dir(stem)})") from exc
        self.mark_step(stem, step)

    def run(self, stems: Optional[list[str]] = None, until: Optional[str] = None) -> dict:
        """Run every remaining step for the given videos (all by default).

        Completed steps are skipped, so interrupted runs resume where
        they stopped. Returns {stem: [steps executed]}.
        """
        if until is not None and until not in STEPS:
            raise InputError(f"unknown step '{until}'")
        executed: dict[str, list[str]] = {}
        for entry in self.config.videos:
            if stems is not None and entry.stem not in stems:
                continue
            ran = []
            for step in STEPS:
                if not self.step_done(entry.stem, step):
                    self.run_step(entry.stem, step)
                    ran.append(step)
                if step == until:
                    break
            executed[entry.stem] = ran
        return executed

    # -- export --------------------------------------------------------

    def export(
        self, kinds: list[str], dest: str | Path, allow_unreviewed: bool = False
    ) -> list[Path]:
        """Copy requested artifacts to an external directory.

        Blurred output is re-rendered with the current overrides and is
        refused (PrivacyGuardError) unless every video is signed off or
        ``allow_unreviewed`` explicitly skips the quality check.
        """
        for kind in kinds:
            if kind not in EXPORT_KINDS:
                raise InputError(f"unknown export kind '{kind}' (choose from {EXPORT_KINDS})")
        dest = Path(dest)
        produced: list[Path] = []
        for entry in self.config.videos:
            stem = entry.stem
            if EXPORT_BLURRED in kinds:
                if not self.step_done(stem, "render"):
                    raise NotReadyError(f"'{stem}' has not been rendered yet")
                if self.quality_state(stem) == QC_PENDING:
                    if not allow_unreviewed:
                        raise PrivacyGuardError(
                            f"'{stem}' has not passed the quality check; review it "
                            f"(poseveil review) or pass --allow-unreviewed"
                        )
                    self.config.quality[stem] = QC_SKIPPED
                    self.save()
                    self.log(f"{stem}: quality check skipped by flag at export")
                out = dest / f"{stem}_blurred_frames"
                out.mkdir(parents=True, exist_ok=True)
                store = pose_io.FrameStore(
                    directory=Path(entry.frames_dir), geometry=self.geometry(stem)
                )
                blur.render(store, self.effective_boxes(stem), self.blur_spec(stem), out)
                produced.append(out)
            if EXPORT_KEYPOINTS_JSON in kinds or EXPORT_KEYPOINTS_CSV in kinds:
                if not self.step_done(stem, "interpolate"):
                    raise NotReadyError(f"'{stem}' has no keypoint outputs yet")
            if EXPORT_KEYPOINTS_JSON in kinds:
                for variant, src in (
                    ("raw", self.tracked_dir(stem)),
                    ("interpolated", self.interpolated_dir(stem)),
                ):
                    out = dest / f"{stem}_keypoints_{variant}"
                    if out.exists():
                        shutil.rmtree(out)
                    shutil.copytree(src, out)
                    produced.append(out)
            if EXPORT_KEYPOINTS_CSV in kinds:
                for variant, src in (
                    ("raw", self.tracked_dir(stem)),
                    ("interpolated", self.interpolated_dir(stem)),
                ):
                    frames, _ = pose_io.load_pose_files(src, allow_gaps=True)
                    out = dest / f"{stem}_keypoints_{variant}.csv"
                    dest.mkdir(parents=True, exist_ok=True)
                    write_keypoint_csv(out, frames)
                    produced.append(out)
        if EXPORT_BACKUP in kinds:
            out = dest / f"{self.config.name}_backup"
            out.mkdir(parents=True, exist_ok=True)
            shutil.copy2(self.config_path, out / "config.json")
            if self.log_path.exists():
                shutil.copy2(self.log_path, out / "project.log")
            for entry in self.config.videos:
                vdir = out / entry.stem
                vdir.mkdir(exist_ok=True)
                for artifact in (self.boxes_path(entry.stem), self.overrides_path(entry.stem)):
                    if artifact.exists():
                        shutil.copy2(artifact, vdir / artifact.name)
                reports = self.reports_dir(entry.stem)
                if reports.is_dir():
                    shutil.copytree(reports, vdir / "reports", dirs_exist_ok=True)
            produced.append(out)
        return produced


def write_keypoint_csv(path: str | Path, frames: list[FramePose]) -> None:
    """One row per (frame, person): frame, track_id, then x/y/c for each
    of the 25 keypoints (77 columns)."""
    header = ["frame", "track_id"]
    for i in range(25):
        header.extend([f"kp{i}_x", f"kp{i}_y", f"kp{i}_c"])
    lines = [",".join(header)]
    for fp in frames:
        entries = sorted(fp.people, key=lambda p: (p[1] is None, -1 if p[1] is None else p[1]))
        for skel, tid in entries:
            row = [str(fp.frame_index), "" if tid is None else str(tid)]
            for kp in skel.keypoints:
                row.extend([format_float(kp.x), format_float(kp.y), format_float(kp.c)])
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_keypoint_csv(path: str | Path) -> dict[tuple[int, int], list[float]]:
    """Inverse of write_keypoint_csv for comparisons: (frame, track_id)
    -> 75 flat values."""
    out: dict[tuple[int, int], list[float]] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line in lines[1:]:
        cells = line.split(",")
        key = (int(cells[0]), int(cells[1]))
        out[key] = [float(v) for v in cells[2:]]
    return out


def create_project(
    name: str,
    projects_root: str | Path,
    videos: list[dict],
    metadata_dir: Optional[str | Path] = None,
) -> Project:
    """Create a new project directory and persist its configuration.

    Metadata files are linked automatically: any file next to the video
    (or in ``metadata_dir``) sharing the video's stem is associated.
    """
    projects_root = Path(projects_root)
    directory = projects_root / name
    if (directory / "config.json").exists():
        raise ConflictError(f"project '{name}' already exists at {directory}")
    entries = []
    for v in videos:
        stem = v["stem"]
        search = Path(metadata_dir) if metadata_dir else Path(v["pose_dir"]).parent
        exclude = (Path(v["video_path"]).name,) if v.get("video_path") else ()
        meta = [str(p.resolve()) for p in pose_io.find_metadata(search, stem, exclude=exclude)]
        entries.append(
            VideoEntry(
                stem=stem,
                pose_dir=str(Path(v["pose_dir"]).resolve()),
                frames_dir=str(Path(v["frames_dir"]).resolve()),
                video_path=str(Path(v["video_path"]).resolve()) if v.get("video_path") else None,
                metadata=meta,
            )
        )
    config = ProjectConfig(name=name, videos=entries)
    directory.mkdir(parents=True, exist_ok=True)
    project = Project(directory, config)
    project.save()
    project.log(f"project '{name}' created with {len(entries)} video(s)")
    return project


def load_project(directory: str | Path) -> Project:
    directory = Path(directory)
    config_path = directory / "config.json"
    if not config_path.exists():
        raise NotFoundError(f"no project config at {config_path}")
    config = ProjectConfig.from_dict(json.loads(config_path.read_text(encoding="utf-8")))
    return Project(directory, config)
