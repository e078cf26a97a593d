import math
import random

import pytest

from poseveil.errors import InputError, NoPatientError
from poseveil.model import Keypoint, Skeleton, Track, VideoGeometry
from poseveil.patient import identify_patient
from util import track_from, uniform_skel

GEOM = VideoGeometry(640, 360, 10, 30.0)


def stationary_track(x, y, frames, track_id, total=10):
    return track_from(
        {f: uniform_skel(x, y) for f in frames}, track_id=track_id, total=total
    )


def test_single_track_is_patient():
    t = stationary_track(500, 50, range(10), track_id=0)
    pid, scores = identify_patient([t], GEOM)
    assert pid == 0
    assert scores[0].selected


def test_forced_geometry_scores():
    a = stationary_track(320, 180, range(10), track_id=0)
    b = stationary_track(0, 0, range(10), track_id=1)
    pid, scores = identify_patient([a, b], GEOM)
    assert pid == 0
    assert scores[0].mean_center_distance == pytest.approx(0.0)
    assert scores[1].mean_center_distance == pytest.approx(math.hypot(320, 180))
    assert scores[1].mean_center_distance == pytest.approx(367.2, abs=0.1)


def test_presence_filter_beats_centrality():
    center_70 = stationary_track(320, 180, range(7), track_id=0, total=10)
    off_100 = stationary_track(100, 100, range(10), track_id=1, total=10)
    pid, scores = identify_patient([center_70, off_100], GEOM)
    assert pid == 1
    assert not scores[0].eligible


def test_no_eligible_track_raises():
    sparse = stationary_track(320, 180, range(5), track_id=0, total=10)
    with pytest.raises(NoPatientError):
        identify_patient([sparse], GEOM)


def test_empty_tracks_is_input_error():
    with pytest.raises(InputError):
        identify_patient([], GEOM)


def test_undefined_centroid_frames_skipped():
    frames = {f: uniform_skel(320, 180) for f in range(9)}
    frames[9] = uniform_skel(0, 0, c=0.0)  # no centroid this frame
    t = Track(track_id=0, frames=frames, presence_ratio=1.0)
    pid, scores = identify_patient([t], GEOM)
    assert pid == 0
    assert scores[0].mean_center_distance == pytest.approx(0.0)


def test_tie_breaks_to_lower_track_id():
    a = stationary_track(300, 180, range(10), track_id=3)
    b = stationary_track(340, 180, range(10), track_id=5)  # same distance, mirrored
    pid, _ = identify_patient([b, a], GEOM)
    assert pid == 3


def test_scale_invariance_of_selection():
    rng = random.Random(19)
    for _ in range(50):
        tracks = []
        for tid in range(3):
            x, y = rng.uniform(0, 640), rng.uniform(0, 360)
            tracks.append(stationary_track(x, y, range(10), track_id=tid))
        pid, _ = identify_patient(tracks, GEOM)
        k = rng.uniform(0.1, 10.0)
        scaled_geom = VideoGeometry(
            max(1, round(640 * k)), max(1, round(360 * k)), 10, 30.0
        )
        # scale coordinates by the same exact factors as the frame dims
        sx, sy = scaled_geom.width / 640, scaled_geom.height / 360
        scaled = [
            Track(
                t.track_id,
                {
                    f: Skeleton(
                        tuple(Keypoint(kp.x * sx, kp.y * sy, kp.c) for kp in s.keypoints)
                    )
                    for f, s in t.frames.items()
                },
                t.presence_ratio,
            )
            for t in tracks
        ]
        pid_scaled, _ = identify_patient(scaled, scaled_geom)
        assert pid_scaled == pid


def test_monotonicity_moving_winner_closer_keeps_it():
    rng = random.Random(23)
    for _ in range(30):
        tracks = [
            stationary_track(rng.uniform(0, 640), rng.uniform(0, 360), range(10), tid)
            for tid in range(3)
        ]
        pid, scores = identify_patient(tracks, GEOM)
        moved = []
        for t in tracks:
            if t.track_id != pid:
                moved.append(t)
                continue
            closer = {
                f: Skeleton(
                    tuple(
                        Keypoint(
                            320 + (kp.x - 320) * 0.5, 180 + (kp.y - 180) * 0.5, kp.c
                        )
                        for kp in s.keypoints
                    )
                )
                for f, s in t.frames.items()
            }
            moved.append(Track(t.track_id, closer, t.presence_ratio))
        pid2, _ = identify_patient(moved, GEOM)
        assert pid2 == pid
