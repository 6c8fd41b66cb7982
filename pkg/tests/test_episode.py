import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from visgrasp import synth
from visgrasp.episode import (
    REPORT_COLUMNS,
    ReportRow,
    SceneItem,
    SceneSpec,
    episode_from_dict,
    export_report,
    load_episode,
    load_report,
    load_scene,
    save_episode,
    save_scene,
)
from visgrasp.errors import SchemaError, UnknownTarget
from visgrasp.gesture import eval_gesture, fit_gesture_function
from visgrasp.hand import extract_angle_vector
from visgrasp.simulation import model_episode

CAMERA = {"fx": 615, "fy": 615, "px": 320, "py": 240, "width": 640, "height": 480}


def _minimal(frames=None):
    return {"meta": {"episode_id": "e1", "handedness": "right", "fps": 30},
            "camera": CAMERA,
            "objects": [{"id": "o", "class": "cup", "position": [0, 0.2, 0.7]}],
            "frames": frames or [{"t": 0.0, "hand": {"wrist": [0, 0.2, 0.25]}}]}


class TestLoadEpisode:
    def test_minimal(self, tmp_path):
        path = tmp_path / "ep.json"
        path.write_text(json.dumps(_minimal()))
        ep = load_episode(path)
        assert len(ep.frames) == 1
        assert ep.frames[0].objects[0].id == "o"

    def test_twenty_keypoints(self):
        frames = [{"t": 0.0, "hand": {"wrist": [0, 0, 0], "keypoints": [[0, 0, 0]] * 20}}]
        with pytest.raises(SchemaError):
            episode_from_dict(_minimal(frames))

    def test_repeated_timestamp(self):
        frames = [{"t": 0.0, "hand": {"wrist": [0, 0, 0]}}, {"t": 0.0, "hand": {"wrist": [0, 0, 0]}}]
        with pytest.raises(SchemaError):
            episode_from_dict(_minimal(frames))

    def test_missing_wrist(self):
        with pytest.raises(SchemaError):
            episode_from_dict(_minimal([{"t": 0.0, "hand": {}}]))

    def test_no_frames(self):
        doc = _minimal()
        doc["frames"] = []
        with pytest.raises(SchemaError):
            episode_from_dict(doc)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_episode(tmp_path / "nope.json")

    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError):
            load_episode(path)

    def test_cloud_ref(self, tmp_path):
        cloud = synth.object_cloud("apple", n=20)
        np.savetxt(tmp_path / "apple.xyz", cloud)
        doc = _minimal()
        doc["objects"][0]["cloud_ref"] = "apple.xyz"
        path = tmp_path / "ep.json"
        path.write_text(json.dumps(doc))
        obj = load_episode(path).frames[0].objects[0]
        np.testing.assert_allclose(obj.cloud, cloud)
        assert obj.size is not None

    def test_save_load_round_trip(self, tmp_path):
        ep = synth.modeling_episode("fork", seed=2, noise=synth.Noise(0.002, 0.5))
        path = tmp_path / "fork.json"
        save_episode(ep, path)
        back = load_episode(path)
        assert back.meta == ep.meta
        assert len(back.frames) == len(ep.frames)
        for a, b in zip(ep.frames, back.frames):
            assert a.t == b.t
            np.testing.assert_array_equal(a.wrist, b.wrist)
            np.testing.assert_array_equal(a.keypoints, b.keypoints)
        np.testing.assert_array_equal(back.frames[0].objects[0].cloud, ep.frames[0].objects[0].cloud)


class TestSyntheticEpisode:
    def test_zero_noise_inverse(self):
        ep = synth.modeling_episode("cup")
        f = synth.class_gesture("cup")
        target = ep.target_object().position
        for frame in ep.frames:
            d = np.linalg.norm(frame.wrist - target)
            np.testing.assert_allclose(extract_angle_vector(frame.keypoints), eval_gesture(f, d),
                                       atol=1e-6)

    def test_same_seed_identical(self):
        a = synth.modeling_episode("bowl", seed=4, noise=synth.Noise(0.003, 1.0))
        b = synth.modeling_episode("bowl", seed=4, noise=synth.Noise(0.003, 1.0))
        for fa, fb in zip(a.frames, b.frames):
            np.testing.assert_array_equal(fa.wrist, fb.wrist)
            np.testing.assert_array_equal(fa.keypoints, fb.keypoints)

    def test_frame_count_and_schedule(self):
        ep = synth.modeling_episode("apple", duration=1.5, fps=30)
        assert len(ep.frames) == 45
        d = np.linalg.norm(ep.wrists - ep.target_object().position, axis=1)
        assert d[0] == pytest.approx(0.45)
        assert np.all(np.diff(d) < 0)
        assert ep.frames[-1].t == pytest.approx(44 / 30)

    def test_unknown_target(self):
        with pytest.raises(UnknownTarget):
            synth.generate_synthetic_episode(synth.single_object_scene("cup"), "nope",
                                             synth.Trajectory())

    def test_modeling_recovers_generator(self):
        for name in ("apple", "fork", "pitcher"):
            entry = model_episode(synth.modeling_episode(name)).entry
            np.testing.assert_allclose(entry.function.coeffs, synth.class_gesture(name).coeffs,
                                       atol=1e-6)

    def test_noisy_fit_close(self):
        ep = synth.modeling_episode("carrot", seed=1, noise=synth.Noise(0.0, 0.5))
        d = np.linalg.norm(ep.wrists - ep.target_object().position, axis=1)
        f = fit_gesture_function(d, [extract_angle_vector(fr.keypoints) for fr in ep.frames])
        truth = synth.class_gesture("carrot")
        grid = np.linspace(truth.d_end, truth.d_start, 50)
        assert np.max(np.abs(eval_gesture(f, grid) - eval_gesture(truth, grid))) < 1.5


class TestScene:
    def test_round_trip(self, tmp_path):
        scene = synth.make_scene(0.25, seed=3)
        path = tmp_path / "scene.json"
        save_scene(scene, path)
        back = load_scene(path)
        assert back.spacing == 0.25 and back.seed == 3
        for a, b in zip(scene.objects, back.objects):
            assert a.id == b.id and a.object_class == b.object_class
            np.testing.assert_array_equal(a.position, b.position)
            np.testing.assert_array_equal(a.contact_angles, b.contact_angles)
        np.testing.assert_array_equal(back.hand_start, scene.hand_start)

    @given(st.sampled_from([0.3, 0.25, 0.2, 0.15]), st.integers(0, 10 ** 6))
    def test_pairwise_spacing(self, spacing, seed):
        scene = synth.make_scene(spacing, seed)
        pos = [o.position for o in scene.objects]
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                assert np.hypot(*(pos[i] - pos[j])[[0, 2]]) >= spacing - 1e-12

    def test_too_close_rejected(self):
        item = lambda k, x: SceneItem(k, "cup", np.array([x, 0, 0.7]), np.ones(3), np.zeros(6))
        with pytest.raises(SchemaError):
            SceneSpec((item("a", 0.0), item("b", 0.1)), spacing=0.2)


def _rows():
    return [ReportRow(0, 0.3, "obj1", "obj1", True, True, 3.25, 0.93, 2.1),
            ReportRow(1, 0.3, "obj0", "obj2", False, False, 3.5, math.nan, math.nan)]


class TestReport:
    def test_one_row(self, tmp_path):
        path = tmp_path / "r.csv"
        export_report(_rows()[:1], path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(REPORT_COLUMNS)
        assert len(lines) == 2

    def test_header_only(self, tmp_path):
        path = tmp_path / "r.csv"
        export_report([], path)
        assert path.read_text() == ",".join(REPORT_COLUMNS) + "\n"
        assert load_report(path) == []

    @pytest.mark.parametrize("suffix", [".csv", ".json"])
    def test_round_trip(self, tmp_path, suffix):
        rng = np.random.default_rng(0)
        rows = [ReportRow(k, float(rng.uniform(0.1, 0.3)), "a", "b", bool(k % 2), bool(k % 3),
                          float(rng.uniform(2, 4)), float(rng.uniform(0, 1)),
                          float(rng.uniform(0, 5))) for k in range(5)] + _rows()[1:]
        path = tmp_path / f"r{suffix}"
        export_report(rows, path)
        back = load_report(path)
        for a, b in zip(rows, back):
            for col in REPORT_COLUMNS:
                x, y = getattr(a, col), getattr(b, col)
                if isinstance(x, float) and math.isnan(x):
                    assert math.isnan(y)
                elif isinstance(x, float):
                    assert abs(x - y) <= 1e-12
                else:
                    assert x == y

    def test_json_mirrors_columns(self, tmp_path):
        path = tmp_path / "r.json"
        export_report(_rows(), path)
        doc = json.loads(path.read_text())
        assert doc["columns"] == list(REPORT_COLUMNS)
        assert set(doc["trials"][0]) == set(REPORT_COLUMNS)
        assert doc["trials"][1]["r2_mean"] is None

    def test_malformed(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("trial_id,spacing_m\nx,0.3\n")
        with pytest.raises(SchemaError):
            load_report(path)
