import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_rotation
from visgrasp import synth
from visgrasp.errors import TooFewPoints
from visgrasp.geometry import object_size
from visgrasp.gesture import GestureLibraryEntry
from visgrasp.registration import kabsch, register_clouds, validate_gesture_entry


def _rot_z(deg):
    a = np.radians(deg)
    return np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1]])


def _rotation_angle(rot):
    return np.arccos(np.clip((np.trace(rot) - 1) / 2, -1.0, 1.0))


def test_identity():
    cloud = synth.object_cloud("mouse")
    reg = register_clouds(cloud, cloud)
    np.testing.assert_allclose(reg.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(reg.translation, 0.0, atol=1e-12)
    assert reg.rmse == 0.0


def test_known_transform():
    rng = np.random.default_rng(0)
    src = rng.uniform(-0.05, 0.05, (500, 3)) * (1.0, 0.6, 0.3)
    rot, t = _rot_z(20.0), np.array([0.05, 0.0, 0.02])
    reg = register_clouds(src, src @ rot.T + t)
    assert _rotation_angle(reg.rotation.T @ rot) < 1e-6
    np.testing.assert_allclose(reg.translation, t, atol=1e-6)
    assert reg.rmse < 1e-6


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        register_clouds(np.zeros((2, 3)), np.zeros((5, 3)))


def test_kabsch_exact():
    rng = np.random.default_rng(1)
    src = rng.normal(size=(10, 3))
    rot = random_rotation(rng)
    r, t = kabsch(src, src @ rot.T + (1, 2, 3))
    np.testing.assert_allclose(r, rot, atol=1e-12)
    np.testing.assert_allclose(t, (1, 2, 3), atol=1e-12)


@given(st.integers(0, 10 ** 6))
def test_icp_rmse_non_increasing(seed):
    rng = np.random.default_rng(seed)
    src = rng.uniform(-0.05, 0.05, (150, 3)) * (1.0, 0.7, 0.4)
    target = src @ random_rotation(rng, 40).T + rng.uniform(-0.05, 0.05, 3)
    target += rng.normal(0, 1e-3, target.shape)
    history = register_clouds(src, target).history
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))


class TestGate:
    def _entry(self, cloud=True):
        c = synth.object_cloud("bottle")
        return GestureLibraryEntry("bottle", object_size(c), synth.class_gesture("bottle"),
                                   c if cloud else None)

    def test_identical(self):
        entry = self._entry()
        gate = validate_gesture_entry(entry, entry.model_cloud, entry.size)
        assert gate.ok and gate.rmse == 0.0

    def test_scaled_twice(self):
        entry = self._entry()
        big = entry.model_cloud * 2
        gate = validate_gesture_entry(entry, big, object_size(big))
        assert not gate.ok
        assert gate.rmse > 0.1 * object_size(big).radius

    def test_size_only(self):
        entry = self._entry(cloud=False)
        cloud = synth.object_cloud("bottle") * (1.0, 1.04, 1.0) + (0.3, 0.1, 0.7)
        gate = validate_gesture_entry(entry, None, object_size(cloud))
        assert gate.ok
        assert gate.rmse < 0.1 * object_size(cloud).radius

    def test_size_only_rejects_other_object(self):
        entry = self._entry(cloud=False)
        cloud = synth.object_cloud("bowl")
        assert not validate_gesture_entry(entry, None, object_size(cloud))
