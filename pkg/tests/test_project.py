import json

import pytest

from poseveil.cli import main as cli_main
from poseveil.errors import (
    ConflictError,
    NotFoundError,
    NotReadyError,
    PrivacyGuardError,
    StepError,
)
from poseveil.pose_io import load_pose_files
from poseveil.project import (
    STEPS,
    create_project,
    load_project,
    read_keypoint_csv,
    write_keypoint_csv,
)
from poseveil.synth import build_fixture


def make_videos(fixture_input):
    return [
        {
            "stem": "clinic01",
            "pose_dir": fixture_input / "clinic01_poses",
            "frames_dir": fixture_input / "clinic01_frames",
        }
    ]


# -- configuration -------------------------------------------------------


def test_create_links_metadata_by_stem(tmp_path, fixture_input):
    (tmp_path / "other.xlsx").write_text("x")
    proj = create_project("p1", tmp_path / "projects", make_videos(fixture_input))
    meta = proj.config.videos[0].metadata
    assert len(meta) == 1
    assert meta[0].endswith("clinic01.txt")


def test_metadata_optional(tmp_path):
    pose_dir = tmp_path / "b_poses"
    pose_dir.mkdir()
    frames_dir = tmp_path / "b_frames"
    frames_dir.mkdir()
    proj = create_project(
        "p2", tmp_path / "projects", [{"stem": "b", "pose_dir": pose_dir, "frames_dir": frames_dir}]
    )
    assert proj.config.videos[0].metadata == []


def test_config_round_trip(tmp_path, fixture_input):
    proj = create_project("p3", tmp_path / "projects", make_videos(fixture_input))
    proj.config.settings.blur_style = "gaussian"
    proj.config.ledger["clinic01"] = {"track": "2026-01-01T00:00:00"}
    proj.save()
    loaded = load_project(proj.directory)
    assert loaded.config == proj.config


def test_duplicate_name_conflicts(tmp_path, fixture_input):
    create_project("p4", tmp_path / "projects", make_videos(fixture_input))
    with pytest.raises(ConflictError):
        create_project("p4", tmp_path / "projects", make_videos(fixture_input))


def test_load_missing_project(tmp_path):
    with pytest.raises(NotFoundError):
        load_project(tmp_path / "nope")


# -- pipeline ------------------------------------------------------------


def test_full_run_produces_artifacts(completed_project):
    p = completed_project
    stem = "clinic01"
    assert all(p.step_done(stem, s) for s in STEPS)
    assert (p.tracked_dir(stem) / "clinic01_000000000000_keypoints.json").exists()
    assert (p.interpolated_dir(stem) / "clinic01_000000000059_keypoints.json").exists()
    assert p.boxes_path(stem).exists()
    assert (p.rendered_dir(stem) / "frame_000030.png").exists()
    assert p.patient_id(stem) == 0
    report = json.loads((p.reports_dir(stem) / "tracking.json").read_text())
    assert len(report["tracks"]) == 2


def test_rerun_skips_completed_steps(project_copy):
    executed = project_copy.run()
    assert executed == {"clinic01": []}


def test_resume_after_partial_run(tmp_path, fixture_input):
    # interrupt after tracking, resume, and compare rendered bytes with an
    # uninterrupted run
    a = create_project("uninterrupted", tmp_path / "p", make_videos(fixture_input))
    a.run()
    b = create_project("interrupted", tmp_path / "q", make_videos(fixture_input))
    b.run(until="track")
    assert not b.step_done("clinic01", "interpolate")
    b2 = load_project(b.directory)  # fresh process, ledger from disk
    b2.run()
    for i in range(60):
        fa = a.rendered_dir("clinic01") / f"frame_{i:06d}.png"
        fb = b2.rendered_dir("clinic01") / f"frame_{i:06d}.png"
        assert fa.read_bytes() == fb.read_bytes()


def test_no_patient_halts_with_advice(tmp_path):
    # two walkers, both present in under 80% of the frames
    from poseveil.synth import Walker, render_scene_frame, walkers_to_frames, write_raw_pose_files
    from poseveil.model import VideoGeometry
    from poseveil.pose_io import FrameStore

    n = 20
    geom = VideoGeometry(640, 360, n, 30.0)
    w = Walker((300.0, 100.0), (0.0, 0.0), 80.0, set(range(10)))
    frames, _ = walkers_to_frames([w], n)
    pose_dir = tmp_path / "v_poses"
    frames_dir = tmp_path / "v_frames"
    frames_dir.mkdir()
    write_raw_pose_files(frames, pose_dir, "v")
    store = FrameStore(directory=frames_dir, geometry=geom)
    for fp in frames:
        store.save_frame(fp.frame_index, render_scene_frame(geom, list(fp.skeletons)))

    proj = create_project(
        "nopatient",
        tmp_path / "projects",
        [{"stem": "v", "pose_dir": pose_dir, "frames_dir": frames_dir}],
    )
    with pytest.raises(StepError) as err:
        proj.run()
    assert err.value.step == "identify"
    assert "all-person" in str(err.value)

    # with all-person blurring the pipeline completes without a patient
    proj2 = create_project(
        "allpersons",
        tmp_path / "projects2",
        [{"stem": "v", "pose_dir": pose_dir, "frames_dir": frames_dir}],
    )
    proj2.config.settings.blur_targets = "all"
    proj2.save()
    proj2.run()
    assert proj2.patient_id("v") is None


def test_standardize_runs_transcoder_template(tmp_path, fixture_input):
    # stand-in transcoder: a python script that copies the fixture frames
    script = tmp_path / "transcode.py"
    script.write_text(
        "import shutil, sys\n"
        "shutil.copytree(sys.argv[1], sys.argv[2], dirs_exist_ok=True)\n"
    )
    video = tmp_path / "clinic01.mp4"
    video.write_bytes(b"not really a video")
    import sys

    proj = create_project(
        "transcode",
        tmp_path / "projects",
        [
            {
                "stem": "clinic01",
                "pose_dir": fixture_input / "clinic01_poses",
                "frames_dir": tmp_path / "decoded",
                "video_path": video,
            }
        ],
    )
    proj.config.settings.transcode_command = (
        f"{sys.executable} {script} {fixture_input / 'clinic01_frames'} {{frames_dir}}"
    )
    proj.save()
    proj.run_step("clinic01", "standardize")
    assert (tmp_path / "decoded" / "frame_000000.png").exists()
    assert proj.geometry("clinic01").frame_count == 60


# -- export ---------------------------------------------------------------


def test_keypoint_csv_has_77_columns(tmp_path):
    from util import frame, uniform_skel

    frames = [frame(i, uniform_skel(1.0 + i, 2.0), track_ids=(0,)) for i in range(2)]
    path = tmp_path / "kp.csv"
    write_keypoint_csv(path, frames)
    lines = path.read_text().splitlines()
    assert len(lines) == 3  # header + 2 data rows
    assert all(len(line.split(",")) == 77 for line in lines)


def test_export_requires_rendered_output(project_copy, tmp_path):
    proj = project_copy
    proj.config.ledger["clinic01"].pop("render")
    with pytest.raises(NotReadyError):
        proj.export(["blurred"], tmp_path / "out", allow_unreviewed=True)


def test_privacy_guard_blocks_unreviewed_export(project_copy, tmp_path):
    with pytest.raises(PrivacyGuardError):
        project_copy.export(["blurred"], tmp_path / "out")


def test_export_after_sign_off(project_copy, tmp_path):
    proj = project_copy
    proj.sign_off("clinic01")
    produced = proj.export(["blurred"], tmp_path / "out")
    assert (produced[0] / "frame_000000.png").exists()
    # overrides were empty, so the export matches the pipeline rendering
    a = (proj.rendered_dir("clinic01") / "frame_000030.png").read_bytes()
    b = (produced[0] / "frame_000030.png").read_bytes()
    assert a == b


def test_export_skip_flag_is_recorded(project_copy, tmp_path):
    proj = project_copy
    proj.export(["blurred"], tmp_path / "out", allow_unreviewed=True)
    assert proj.quality_state("clinic01") == "skipped"


def test_keypoint_exports_cross_format_equality(project_copy, tmp_path):
    proj = project_copy
    proj.export(["keypoints-csv", "keypoints-json"], tmp_path / "out", allow_unreviewed=True)
    for variant in ("raw", "interpolated"):
        csv_data = read_keypoint_csv(tmp_path / "out" / f"clinic01_keypoints_{variant}.csv")
        frames, _ = load_pose_files(tmp_path / "out" / f"clinic01_keypoints_{variant}")
        structured = {}
        for fp in frames:
            for skel, tid in fp.people:
                flat = []
                for kp in skel.keypoints:
                    flat.extend([kp.x, kp.y, kp.c])
                structured[(fp.frame_index, tid)] = flat
        assert csv_data == structured


def test_backup_contains_rerender_inputs(project_copy, tmp_path):
    proj = project_copy
    produced = proj.export(["backup"], tmp_path / "out", allow_unreviewed=True)
    backup = produced[0]
    assert (backup / "config.json").exists()
    assert (backup / "clinic01" / "face_boxes.csv").exists()
    assert (backup / "clinic01" / "reports" / "tracking.json").exists()


# -- CLI exit codes --------------------------------------------------------


def test_cli_full_loop(tmp_path):
    fixture_dir = tmp_path / "input"
    build_fixture(fixture_dir, n_frames=12)
    root = tmp_path / "projects"
    rc = cli_main(
        [
            "init",
            "cliproj",
            "--root",
            str(root),
            "--video",
            f"clinic01:{fixture_dir/'clinic01_poses'}:{fixture_dir/'clinic01_frames'}",
        ]
    )
    assert rc == 0
    config = str(root / "cliproj")
    assert cli_main(["run", "--config", config]) == 0
    assert cli_main(["status", "--config", config]) == 0

    # privacy guard: blurred export refused before sign-off
    rc = cli_main(["export", "--config", config, "--what", "blurred", "--dest", str(tmp_path / "o")])
    assert rc == 4
    rc = cli_main(
        [
            "export",
            "--config",
            config,
            "--what",
            "blurred",
            "--dest",
            str(tmp_path / "o"),
            "--allow-unreviewed",
        ]
    )
    assert rc == 0
    assert (tmp_path / "o" / "clinic01_blurred_frames" / "frame_000000.png").exists()


def test_cli_input_error_exit_code(tmp_path):
    assert cli_main(["run", "--config", str(tmp_path / "missing")]) == 2


def test_cli_eval(tmp_path, capsys):
    gt = tmp_path / "gt.csv"
    det = tmp_path / "det.csv"
    gt.write_text("frame,x,y,w,h\n0,10,10,20,20\n")
    det.write_text("frame,x,y,w,h,confidence\n0,10,10,20,20,0.9\n")
    rc = cli_main(["eval", "--gt", str(gt), "--det", str(det), "--pr-out", str(tmp_path / "pr.csv")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "precision: 1.000000" in out
    assert "ap: 1.000000" in out
    assert (tmp_path / "pr.csv").read_text().splitlines()[0] == "recall,precision"
