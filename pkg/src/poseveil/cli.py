"""Command-line entry points.

Exit codes: 0 ok, 2 input error, 3 pipeline step failure, 4 privacy-guard
refusal (export before quality-check sign-off).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import evaluation, interpolation, patient, pose_io, project as project_mod, synth, tracking
from .errors import InputError, PoseVeilError, PrivacyGuardError, StepError
from .model import VideoGeometry, apply_tracks_to_frames, tracks_from_frames

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STEP = 3
EXIT_PRIVACY = 4


def _load(args) -> project_mod.Project:
    return project_mod.load_project(args.config)


def cmd_init(args) -> int:
    videos = []
    for spec in args.video:
        parts = spec.split(":")
        if len(parts) < 3:
            raise InputError(
                f"--video needs stem:pose_dir:frames_dir[:video_path], got '{spec}'"
            )
        entry = {"stem": parts[0], "pose_dir": parts[1], "frames_dir": parts[2]}
        if len(parts) > 3:
            entry["video_path"] = parts[3]
        videos.append(entry)
    proj = project_mod.create_project(
        args.name, args.root, videos, metadata_dir=args.metadata_dir
    )
    print(f"created project at {proj.directory}")
    return EXIT_OK


def _apply_setting_flags(proj: project_mod.Project, args) -> None:
    s = proj.config.settings
    for flag, attr in (
        ("threshold", "track_threshold"),
        ("scope", "interp_scope"),
        ("interp_threshold", "interp_threshold"),
        ("presence", "presence_threshold"),
        ("targets", "blur_targets"),
        ("style", "blur_style"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(s, attr, value)
    proj.save()


def cmd_run(args) -> int:
    proj = _load(args)
    _apply_setting_flags(proj, args)
    executed = proj.run(stems=args.stem or None)
    for stem, steps in executed.items():
        print(f"{stem}: ran {', '.join(steps) if steps else 'nothing (already complete)'}")
    return EXIT_OK


def _single_step(args, step: str) -> int:
    proj = _load(args)
    _apply_setting_flags(proj, args)
    stems = args.stem or [v.stem for v in proj.config.videos]
    for stem in stems:
        if step == "render" and getattr(args, "overrides", None):
            # install the given override file before rendering
            import shutil

            shutil.copy2(args.overrides, proj.overrides_path(stem))
        for prereq in project_mod.STEPS:
            if prereq == step:
                break
            if not proj.step_done(stem, prereq):
                proj.run_step(stem, prereq)
        proj.run_step(stem, step)
        print(f"{stem}: step '{step}' complete")
    return EXIT_OK


def _standalone_geometry(args, frame_count: int) -> VideoGeometry:
    if getattr(args, "frames_dir", None):
        return pose_io.load_frames(args.frames_dir).geometry
    if getattr(args, "width", None) and getattr(args, "height", None):
        return VideoGeometry(args.width, args.height, frame_count, 30.0)
    raise InputError("standalone mode needs --frames-dir or --width and --height")


def cmd_track_standalone(args) -> int:
    frames, _ = pose_io.load_pose_files(args.pose_dir, allow_gaps=args.allow_gaps)
    geom = _standalone_geometry(args, len(frames))
    threshold = args.threshold if args.threshold is not None else tracking.DEFAULT_THRESHOLD
    tracked, tracks, events = tracking.assign_ids(frames, geom, threshold)
    out = Path(args.out_dir)
    stem = pose_io.scan_pose_dir(args.pose_dir).stem
    pose_io.write_pose_files(tracked, out, stem)
    tracking.write_tracking_report(out / "tracking_report.json", tracks, events)
    print(f"tracked {len(tracks)} people across {len(frames)} frames -> {out}")
    return EXIT_OK


def cmd_interpolate_standalone(args) -> int:
    frames, _ = pose_io.load_pose_files(args.pose_dir, allow_gaps=args.allow_gaps)
    tracks = tracks_from_frames(frames, frame_count=len(frames))
    scope = args.scope or interpolation.FACE_ONLY
    threshold = args.interp_threshold if args.interp_threshold is not None else 0.5
    repaired, report = interpolation.interpolate_tracks(tracks, scope, threshold)
    out = Path(args.out_dir)
    stem = pose_io.scan_pose_dir(args.pose_dir).stem
    pose_io.write_pose_files(apply_tracks_to_frames(frames, repaired), out, stem)
    interpolation.write_repair_report(out / "interpolation_report.json", report)
    print(f"repaired {len(report)} observations -> {out}")
    return EXIT_OK


def cmd_identify_standalone(args) -> int:
    frames, _ = pose_io.load_pose_files(args.pose_dir, allow_gaps=args.allow_gaps)
    geom = _standalone_geometry(args, len(frames))
    tracks = tracks_from_frames(frames, frame_count=len(frames))
    presence = args.presence if args.presence is not None else 0.8
    patient_id, scores = patient.identify_patient(tracks, geom, presence)
    print(json.dumps(
        {
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
        },
        indent=2,
    ))
    return EXIT_OK


def cmd_eval(args) -> int:
    truths = evaluation.load_ground_truths(args.gt)
    if args.det:
        detections = evaluation.load_detections(args.det)
    elif args.boxes:
        # score the pipeline's own face boxes against a manual ground truth
        from .blur import load_box_sidecar

        detections = evaluation.boxes_to_detections(load_box_sidecar(args.boxes))
    else:
        raise InputError("eval needs --det or --boxes")
    report = evaluation.evaluate(detections, truths, iou_threshold=args.iou)
    for line in evaluation.report_lines(report):
        print(line)
    if args.pr_out and report.pr_curve:
        evaluation.write_pr_curve(args.pr_out, report.pr_curve)
        print(f"pr curve written to {args.pr_out}")
    return EXIT_OK


def cmd_export(args) -> int:
    proj = _load(args)
    produced = proj.export(args.what, args.dest, allow_unreviewed=args.allow_unreviewed)
    for p in produced:
        print(f"exported {p}")
    return EXIT_OK


def cmd_review(args) -> int:
    from . import review

    proj = _load(args)
    ui_dir = args.ui_dir or os.environ.get("POSEVEIL_UI")
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    print(f"review service on http://{args.host}:{args.port}/ (ctrl-c to stop)")
    review.serve(proj, host=args.host, port=args.port, frontend_dir=ui_dir)
    return EXIT_OK


def cmd_fixture(args) -> int:
    root = synth.build_fixture(args.dest, stem=args.stem, n_frames=args.frames, seed=args.seed)
    print(f"fixture written under {root}")
    return EXIT_OK


def cmd_status(args) -> int:
    proj = _load(args)
    payload = {
        v.stem: {
            "steps": proj.config.ledger.get(v.stem, {}),
            "quality_state": proj.quality_state(v.stem),
        }
        for v in proj.config.videos
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poseveil",
        description="De-identification and kinematics pipeline for clinical videos",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a new project")
    p.add_argument("name")
    p.add_argument("--root", default="projects", help="directory that holds projects")
    p.add_argument(
        "--video",
        action="append",
        required=True,
        help="stem:pose_dir:frames_dir[:video_path]; repeatable",
    )
    p.add_argument("--metadata-dir", default=None)
    p.set_defaults(func=cmd_init)

    def add_config(p, required=True):
        p.add_argument("--config", required=required, help="project directory (holds config.json)")
        p.add_argument("--stem", action="append", help="restrict to this video; repeatable")

    def add_standalone(p):
        p.add_argument("--pose-dir", default=None, help="run on bare keypoint files instead of a project")
        p.add_argument("--out-dir", default=None)
        p.add_argument("--frames-dir", default=None, help="derive frame geometry from these images")
        p.add_argument("--width", type=int, default=None)
        p.add_argument("--height", type=int, default=None)
        p.add_argument("--allow-gaps", action="store_true")

    def add_settings(p):
        p.add_argument("--threshold", type=float, help="new-person distance, fraction of diagonal")
        p.add_argument("--scope", choices=["face", "body"], help="interpolation scope")
        p.add_argument("--interp-threshold", dest="interp_threshold", type=float)
        p.add_argument("--presence", type=float, help="patient presence filter")
        p.add_argument("--targets", choices=["patient", "all"], help="who gets blurred")
        p.add_argument("--style", choices=["solid", "gaussian"], help="blur style")

    p = sub.add_parser("run", help="run every remaining pipeline step")
    add_config(p)
    add_settings(p)
    p.set_defaults(func=cmd_run)

    standalone_runners = {
        "track": cmd_track_standalone,
        "interpolate": cmd_interpolate_standalone,
        "identify": cmd_identify_standalone,
    }
    for step, description in (
        ("track", "assign unique IDs to every person"),
        ("interpolate", "repair unreliable keypoints"),
        ("identify", "pick the patient track"),
        ("blur", "compute face boxes and render blurred frames"),
    ):
        p = sub.add_parser(step, help=description)
        add_config(p, required=False)
        add_settings(p)
        if step in standalone_runners:
            add_standalone(p)
        if step == "blur":
            p.add_argument("--overrides", default=None, help="override file to apply at render")
        target = "render" if step == "blur" else step

        def dispatch(a, _t=target, _s=step):
            if getattr(a, "pose_dir", None):
                if _s in ("track", "interpolate") and not a.out_dir:
                    raise InputError("--pose-dir mode needs --out-dir")
                return standalone_runners[_s](a)
            if not a.config:
                raise InputError("provide --config (project mode) or --pose-dir (standalone)")
            return _single_step(a, _t)

        p.set_defaults(func=dispatch)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--gt", required=True, help="csv: frame,x,y,w,h")
    p.add_argument("--det", default=None, help="csv: frame,x,y,w,h,confidence")
    p.add_argument("--boxes", default=None, help="face-box sidecar to evaluate instead of --det")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--pr-out", default=None, help="write the PR curve here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="export project artifacts")
    add_config(p)
    p.add_argument(
        "--what",
        action="append",
        required=True,
        choices=list(project_mod.EXPORT_KINDS),
        help="repeatable",
    )
    p.add_argument("--dest", required=True)
    p.add_argument(
        "--allow-unreviewed",
        action="store_true",
        help="skip the quality-check gate (recorded in the project log)",
    )
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("review", help="start the quality-check review service")
    add_config(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui-dir", default=None, help="built frontend assets to serve at /")
    p.set_defaults(func=cmd_review)

    p = sub.add_parser("fixture", help="write the bundled synthetic demo input")
    p.add_argument("dest")
    p.add_argument("--stem", default="clinic01")
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--seed", type=int, default=20240)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("status", help="show step completion per video")
    add_config(p)
    p.set_defaults(func=cmd_status)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PrivacyGuardError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_PRIVACY
    except StepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STEP
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PoseVeilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STEP


if __name__ == "__main__":
    sys.exit(main())
