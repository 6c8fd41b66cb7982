import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from visgrasp import synth
from visgrasp.controller import (
    CloseFurther,
    ContactModel,
    ControlCommand,
    ControllerConfig,
    HandState,
    Lock,
    Observation,
    Stage,
    controller_step,
    grip_tighten_dof,
    simulate_hand,
)
from visgrasp.errors import InputError, MissingLibraryEntry
from visgrasp.geometry import object_size
from visgrasp.gesture import GestureLibrary, GestureLibraryEntry
from visgrasp.intent import SceneObject
from visgrasp.simulation import run_trial

STANDBY = np.array([30.0, 30, 30, 30, 60, 15])


def _cup_setup():
    cloud = synth.object_cloud("cup")
    entry = GestureLibraryEntry("cup", object_size(cloud), synth.class_gesture("cup"), cloud)
    placed = cloud + (0.0, 0.2, 0.7)
    obj = SceneObject("cup1", "cup", np.array([0.0, 0.2, 0.7]), object_size(placed), placed)
    return GestureLibrary((entry,)), obj


def _track(n, step=0.1):
    return np.array([[0.0, 0.2, 0.7 - 0.5 + step * k] for k in range(n)])


class TestControllerStep:
    def test_first_frame_standby(self):
        lib, obj = _cup_setup()
        cfg = ControllerConfig(standby_pose=STANDBY)
        track = _track(1)
        state, cmd = controller_step(HandState.initial(STANDBY),
                                     Observation(track[0], track, (obj,), lib), cfg, 1 / 30)
        assert state.stage is Stage.INTENT and cmd.stage is Stage.INTENT
        np.testing.assert_array_equal(cmd.target_angles, STANDBY)

    def test_commit_on_third_agreeing_frame(self):
        lib, obj = _cup_setup()
        cfg = ControllerConfig(standby_pose=STANDBY, min_travel=0.0, actuator_time_constant=0)
        other = SceneObject("far", "cup", np.array([0.6, 0.2, 0.7]))
        state = HandState.initial(STANDBY)
        track = _track(6, 0.05)
        stages = []
        for k in range(5):
            state, cmd = controller_step(
                state, Observation(track[k], track[:k + 1], (obj, other), lib), cfg, 1 / 30)
            stages.append(state.stage)
        # estimates start once three positions exist (k = 2); commit on the third (k = 4)
        assert stages[:4] == [Stage.INTENT] * 4
        assert stages[4] is Stage.GRASPING
        assert state.target_id == "cup1"

    def test_min_travel_delays_commit(self):
        lib, obj = _cup_setup()
        cfg = ControllerConfig(standby_pose=STANDBY, min_travel=0.15)
        state = HandState.initial(STANDBY)
        track = _track(8, 0.05)
        for k in range(5):
            state, _ = controller_step(
                state, Observation(track[k], track[:k + 1], (obj,), lib), cfg, 1 / 30)
        assert state.stage is Stage.INTENT

    def test_below_end_distance_starts_tightening(self):
        lib, obj = _cup_setup()
        entry = lib.entries[0]
        cfg = ControllerConfig(standby_pose=STANDBY)
        state = HandState(STANDBY.copy(), stage=Stage.GRASPING, target_id="cup1", entry=entry)
        wrist = obj.position - (0, 0, entry.function.d_end * 0.9)
        state, cmd = controller_step(state, Observation(wrist, _track(5), (obj,), lib), cfg, 0.1)
        assert state.stage is Stage.TIGHTENING

    def test_grasping_command_follows_gesture(self):
        lib, obj = _cup_setup()
        entry = lib.entries[0]
        cfg = ControllerConfig(standby_pose=STANDBY)
        state = HandState(STANDBY.copy(), stage=Stage.GRASPING, target_id="cup1", entry=entry)
        wrist = obj.position - (0, 0, 0.3)
        _, cmd = controller_step(state, Observation(wrist, _track(5), (obj,), lib), cfg, 0.1)
        np.testing.assert_allclose(cmd.target_angles, entry.function(0.3))

    def test_missing_library_entry(self):
        lib, _ = _cup_setup()
        bowl = SceneObject("b", "bowl", np.array([0.0, 0.2, 0.7]))
        cfg = ControllerConfig(standby_pose=STANDBY, min_travel=0.0, commit_count=1)
        track = _track(3)
        with pytest.raises(MissingLibraryEntry):
            controller_step(HandState.initial(STANDBY),
                            Observation(track[-1], track, (bowl,), lib), cfg, 0.1)

    def test_dt_must_be_positive(self):
        lib, obj = _cup_setup()
        with pytest.raises(InputError):
            controller_step(HandState.initial(STANDBY),
                            Observation(np.zeros(3), np.zeros((1, 3)), (obj,), lib),
                            ControllerConfig(), 0.0)


class TestGripTighten:
    cfg = ControllerConfig()

    def test_force_lock(self):
        assert grip_tighten_dof(40.0, 55.0, 4.2, self.cfg) == Lock("force")

    def test_close_further(self):
        assert grip_tighten_dof(55.0, 55.0, 2.0, self.cfg) == CloseFurther(60.0)

    def test_limit_lock(self):
        assert grip_tighten_dof(60.0, 55.0, 3.0, self.cfg) == Lock("limit")

    def test_below_final_keeps_closing(self):
        assert grip_tighten_dof(50.0, 55.0, 1.0, self.cfg) == CloseFurther(55.0)

    def test_threshold_exact(self):
        assert grip_tighten_dof(30.0, 55.0, 4.0, self.cfg) == Lock("force")


class TestSimulateHand:
    def _cmd(self, value):
        return ControlCommand(np.full(6, value), Stage.GRASPING)

    def test_first_order_lag(self):
        state = HandState(np.zeros(6))
        out = simulate_hand(state, self._cmd(60.0), ContactModel(np.full(6, np.inf)), 0.1, 0.1)
        np.testing.assert_allclose(out.angles, 60 * (1 - np.exp(-1)))
        assert out.angles[0] == pytest.approx(37.93, abs=0.005)

    def test_zero_step(self):
        state = HandState(np.full(6, 12.0))
        assert simulate_hand(state, self._cmd(60.0), ContactModel(np.zeros(6)), 0.0) is state

    def test_contact_force(self):
        contact = ContactModel(np.full(6, 45.0), stiffness=1.0)
        out = simulate_hand(HandState(np.zeros(6)), self._cmd(50.0), contact, 0.1, 0.0)
        np.testing.assert_allclose(out.forces, 5.0)

    def test_locked_dofs_do_not_move(self):
        locked = np.array([True, False, True, False, False, False])
        state = HandState(np.full(6, 20.0), locked=locked)
        out = simulate_hand(state, self._cmd(80.0), ContactModel(np.full(6, np.inf)), 0.1, 0.1)
        np.testing.assert_array_equal(out.angles[locked], state.angles[locked])
        assert np.all(out.angles[~locked] > 20.0)

    def test_negative_dt(self):
        with pytest.raises(InputError):
            simulate_hand(HandState(np.zeros(6)), self._cmd(1.0), ContactModel(np.zeros(6)), -1)


def _trial(offsets, tau, seed, name="cup", sigma=0.0):
    scene = synth.single_object_scene(name)
    final = np.array(synth.CATALOG[name].final_pose, dtype=float)
    contact = np.array([final[j] - o if o is not None else np.inf for j, o in enumerate(offsets)])
    ep = synth.generate_synthetic_episode(scene, "obj0", synth.Trajectory(duration=2.0), None,
                                          synth.Noise(sigma), seed)
    cloud = synth.object_cloud(name)
    lib = GestureLibrary((GestureLibraryEntry(name, object_size(cloud),
                                              synth.class_gesture(name), cloud),))
    cfg = ControllerConfig(actuator_time_constant=tau)
    return run_trial(ep, lib, cfg, {"obj0": ContactModel(contact)}), final


offset_st = st.one_of(st.none(), st.floats(-4.0, 10.0))


@given(st.lists(offset_st, min_size=6, max_size=6), st.sampled_from([0.0, 0.05, 0.1]),
       st.integers(0, 1000))
def test_trace_invariants(offsets, tau, seed):
    out, _ = _trial(offsets, tau, seed, sigma=0.003)
    order = [Stage(f["stage"]).order for f in out.trace]
    assert order == sorted(order)
    frozen = {}
    for f in out.trace:
        for j in range(6):
            if j in frozen:
                assert f["angles"][j] == frozen[j]
            elif f["locked"][j]:
                frozen[j] = f["angles"][j]
    assert out.done


@given(st.lists(offset_st, min_size=6, max_size=6), st.integers(0, 1000))
def test_every_dof_locks_by_force_or_limit(offsets, seed):
    out, _ = _trial(offsets, 0.0, seed)
    final = out.final_state.entry.function.final_angles()
    angles = out.final_state.angles
    forces = out.final_state.forces
    for j, reason in enumerate(out.lock_reasons):
        assert reason in ("force", "limit")
        if reason == "force":
            assert forces[j] >= 4.0
            assert angles[j] <= final[j] + 5.0
        else:
            assert forces[j] < 4.0
            assert angles[j] == final[j] + 5.0


def test_ideal_actuator_tracks_gesture_exactly():
    out, _ = _trial((6, 6, 6, 6, 2, None), 0.0, 3)
    f = out.final_state.entry.function
    np.testing.assert_allclose(out.samples_angles, f(out.samples_d), atol=1e-9)


def test_duration_deterministic():
    a, _ = _trial((6, 6, 6, 6, 2, None), 0.1, 5, sigma=0.004)
    b, _ = _trial((6, 6, 6, 6, 2, None), 0.1, 5, sigma=0.004)
    assert a.duration == b.duration
    assert a.trace == b.trace
