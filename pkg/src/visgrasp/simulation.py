"""End-to-end workflows: library building, simulated grasp trials, intent sweeps."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import (
    ContactModel,
    ControllerConfig,
    HandState,
    Observation,
    Stage,
    controller_step,
    intent_update,
    simulate_hand,
)
from .errors import InputError, SchemaError, ZeroReferenceVariance
from .episode import EpisodeRecord, ReportRow, SceneSpec
from .geometry import object_size, reconstruct_object
from .gesture import (
    GestureLibrary,
    GestureLibraryEntry,
    approach_mask,
    eval_gesture,
    fit_gesture_function,
)
from .hand import extract_angle_vector
from .intent import estimate_target_sphere_baseline
from .metrics import anthropomorphism
from . import synth

log = logging.getLogger(__name__)

SPHERE_RADIUS = 0.15


# -- gesture modeling -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModelingResult:
    entry: GestureLibraryEntry
    n_samples: int
    residual_rms: float


def model_episode(ep: EpisodeRecord, seed=0) -> ModelingResult:
    """Fit one library entry from a demonstration episode with hand keypoints."""
    frames = [f for f in ep.frames if f.keypoints is not None]
    if not frames:
        raise SchemaError(f"episode {ep.meta.episode_id} has no hand keypoints")
    target = ep.target_object()
    cloud = target.cloud
    if cloud is None:
        src = next((f for f in ep.frames if f.depth is not None and target.id in f.object_bboxes),
                   None)
        if src is None:
            raise SchemaError(f"episode {ep.meta.episode_id}: object has neither cloud nor depth")
        cloud, _, _ = reconstruct_object(src.depth, src.object_bboxes[target.id], ep.camera,
                                         seed=seed)
    size = object_size(cloud)
    d = np.array([np.linalg.norm(f.wrist - target.position) for f in frames])
    angles = np.array([extract_angle_vector(f.keypoints) for f in frames])
    keep = approach_mask(d)
    f = fit_gesture_function(d[keep], angles[keep])
    resid = angles[keep] - eval_gesture(f, d[keep])
    cls = ep.meta.object_class or target.object_class
    entry = GestureLibraryEntry(cls, size, f, cloud - size.centroid)
    return ModelingResult(entry, int(keep.sum()), float(np.sqrt(np.mean(resid ** 2))))


def build_library(episodes, seed=0):
    lib = GestureLibrary()
    results = []
    for ep in episodes:
        res = model_episode(ep, seed)
        lib = lib.with_entry(res.entry)
        results.append(res)
    return lib, results


def standby_from_library(lib: GestureLibrary) -> np.ndarray:
    """Semi-closed pose: per DOF, the midpoint of the gesture-function range, averaged over entries."""
    if len(lib) == 0:
        return np.zeros(6)
    mids = []
    for e in lib:
        f = e.function
        vals = eval_gesture(f, np.linspace(f.d_end, f.d_start, 101))
        mids.append((vals.min(axis=0) + vals.max(axis=0)) / 2.0)
    return np.mean(mids, axis=0)


# -- grasp trials -----------------------------------------------------------

@dataclass(eq=False)
class TrialOutcome:
    intended: str
    committed: str
    done: bool
    duration: float
    lock_reasons: tuple
    final_state: HandState
    trace: list = field(default_factory=list)
    samples_d: np.ndarray = None
    samples_angles: np.ndarray = None
    commit_frame: int = None

    @property
    def intent_ok(self):
        return self.committed == self.intended

    @property
    def force_locks(self):
        return sum(r == "force" for r in self.lock_reasons)

    @property
    def success(self):
        return self.intent_ok and self.done and self.force_locks >= 2

    def anthropomorphism(self, reference):
        if self.samples_d is None or len(self.samples_d) < 2:
            return None
        try:
            return anthropomorphism(self.samples_d, self.samples_angles, reference)
        except ZeroReferenceVariance:
            return None


NO_CONTACT = ContactModel(np.full(6, np.inf))


def run_trial(ep: EpisodeRecord, library: GestureLibrary, cfg: ControllerConfig,
              contacts: dict, intended=None, settle_time=5.0) -> TrialOutcome:
    """Drive the controller through an episode and let the grip settle afterwards."""
    dt = 1.0 / ep.meta.fps
    objects = ep.frames[0].objects
    if cfg.standby_pose is None:
        cfg = replace(cfg, standby_pose=standby_from_library(library))
    state = HandState.initial(cfg.standby_pose)
    wrists = ep.wrists
    t0 = ep.frames[0].t
    trace, samples_d, samples_a = [], [], []
    commit_frame = None

    def tick(k, t, wrist, track, complete):
        nonlocal state, commit_frame
        obs = Observation(wrist, track, objects, library, complete)
        was_intent = state.stage is Stage.INTENT
        state, cmd = controller_step(state, obs, cfg, dt)
        if was_intent and state.stage is not Stage.INTENT:
            commit_frame = k
        contact = contacts.get(state.target_id, NO_CONTACT)
        state = simulate_hand(state, cmd, contact, dt, cfg.actuator_time_constant)
        dist = None
        if state.target_id is not None:
            pos = next(o.position for o in objects if o.id == state.target_id)
            dist = float(np.linalg.norm(wrist - pos))
        if cmd.stage is Stage.GRASPING:
            samples_d.append(dist)
            samples_a.append(state.angles.copy())
        trace.append({"t": t, "stage": cmd.stage.value, "target": cmd.selected_target,
                      "distance": dist, "command": cmd.target_angles.tolist(),
                      "angles": state.angles.tolist(), "forces": state.forces.tolist(),
                      "locked": state.locked.tolist()})

    t = t0
    for k, frame in enumerate(ep.frames):
        t = frame.t
        tick(k, t, frame.wrist, wrists[:k + 1], False)
        if state.stage is Stage.DONE:
            break
    k = len(ep.frames)
    t_stop = t + settle_time
    while state.stage is not Stage.DONE and t < t_stop - 1e-12:
        t = t + dt
        tick(k, t, wrists[-1], wrists, True)
        k += 1

    committed = state.target_id if state.target_id is not None else (state.candidate or "")
    return TrialOutcome(
        intended=intended if intended is not None else (ep.meta.target_id or ""),
        committed=committed, done=state.stage is Stage.DONE, duration=float(t - t0 + dt),
        lock_reasons=state.lock_reason, final_state=state, trace=trace,
        samples_d=np.array(samples_d) if samples_d else None,
        samples_angles=np.array(samples_a) if samples_a else None,
        commit_frame=commit_frame)


def scene_contacts(scene: SceneSpec):
    return {o.id: ContactModel(o.contact_angles, scene.stiffness) for o in scene.objects}


@dataclass(frozen=True)
class TrialSettings:
    duration: float = 2.0
    fps: float = 30.0
    pos_sigma: float = 0.005
    angle_sigma: float = 0.0


def simulate_scene(scene: SceneSpec, library, n_trials, seed, cfg: ControllerConfig,
                   settings=TrialSettings(), first_trial_id=0):
    """``n_trials`` random-target reaches in one scene: ``(rows, traces)``."""
    rng = np.random.default_rng(seed)
    ids = [o.id for o in scene.objects]
    contacts = scene_contacts(scene)
    rows, traces = [], []
    for i in range(n_trials):
        target = ids[int(rng.integers(len(ids)))]
        trial_seed = int(rng.integers(2 ** 31))
        ep = synth.generate_synthetic_episode(
            scene, target, synth.Trajectory(duration=settings.duration, fps=settings.fps),
            None, synth.Noise(settings.pos_sigma, settings.angle_sigma), trial_seed)
        out = run_trial(ep, library, cfg, contacts, intended=target)
        r2 = rmse = float("nan")
        reference = None
        if out.final_state.entry is not None:
            reference = out.final_state.entry.function
            rep = out.anthropomorphism(reference)
            if rep is not None:
                r2, rmse = rep.r2_mean, rep.rmse_mean
        trial_id = first_trial_id + i
        rows.append(ReportRow(trial_id, float(scene.spacing), target, out.committed,
                              out.intent_ok, out.success, out.duration, r2, rmse))
        traces.append({
            "trial_id": trial_id,
            "spacing_m": float(scene.spacing),
            "objects": [{"id": o.id, "class": o.object_class,
                         "position": o.position.tolist()} for o in scene.objects],
            "wrist": [[f.t, *f.wrist.tolist()] for f in ep.frames],
            "commit_frame": out.commit_frame,
            "reference": None if reference is None else {
                "coeffs": reference.coeffs.tolist(), "d_range": list(reference.d_range)},
            "frames": out.trace,
        })
    return rows, traces


# -- intent-only sweeps ------------------------------------------------------

def commit_on_track(track, objects, cfg: ControllerConfig):
    """Replay the controller's commit rule: ``(frame index, estimate)`` or ``(None, last)``."""
    track = np.asarray(track, dtype=float)
    candidate, streak, est = None, 0, None
    for k in range(len(track)):
        e, candidate, streak = intent_update(track[:k + 1], objects, cfg, candidate, streak)
        est = e or est
        if streak >= cfg.commit_count:
            return k, e
    return None, est


def sphere_on_track(track, objects, radius=SPHERE_RADIUS):
    """Sphere-proximity decision at the first frame the hand enters any sphere."""
    track = np.asarray(track, dtype=float)
    centres = np.array([o.position for o in objects], dtype=float)
    dist = np.linalg.norm(track[:, None, :] - centres[None, :, :], axis=2)
    inside = np.flatnonzero((dist <= radius).any(axis=1))
    if len(inside):
        k = int(inside[0])
        return k, estimate_target_sphere_baseline(track[k], objects, radius)
    return None, estimate_target_sphere_baseline(track[-1], objects, radius)


@dataclass(frozen=True)
class SweepResult:
    spacing: float
    trials: int
    mtr_correct: int
    sphere_correct: int
    oracle_agree: int

    @property
    def mtr_accuracy(self):
        return 100.0 * self.mtr_correct / self.trials

    @property
    def sphere_accuracy(self):
        return 100.0 * self.sphere_correct / self.trials


def intent_sweep(spacing, n_trials, pos_sigma, seed, cfg=ControllerConfig(),
                 radius=SPHERE_RADIUS, duration=2.0, fps=30.0, oracle=None):
    """Regression-line versus sphere-proximity intent accuracy at one spacing.

    Each trial draws a fresh 3-object layout and target.  ``oracle`` may be
    a callable ``(true_track, objects) -> id`` evaluated on the noise-free
    track; agreement with it is counted in ``oracle_agree``.
    """
    rng = np.random.default_rng(seed)
    mtr = sph = agree = 0
    for _ in range(n_trials):
        scene = synth.make_scene(spacing, int(rng.integers(2 ** 31)))
        target = scene.objects[int(rng.integers(len(scene.objects)))].id
        trial_seed = int(rng.integers(2 ** 31))
        ep = synth.generate_synthetic_episode(
            scene, target, synth.Trajectory(duration=duration, fps=fps), None,
            synth.Noise(pos_sigma), trial_seed)
        objects = ep.frames[0].objects
        _, est = commit_on_track(ep.wrists, objects, cfg)
        mtr += est is not None and est.target_id == target
        _, base = sphere_on_track(ep.wrists, objects, radius)
        sph += base.target_id == target
        if oracle is not None:
            clean = ep if pos_sigma == 0 else synth.generate_synthetic_episode(
                scene, target, synth.Trajectory(duration=duration, fps=fps), None,
                synth.Noise(), trial_seed)
            agree += oracle(clean.wrists, objects) == target
    return SweepResult(float(spacing), n_trials, int(mtr), int(sph), int(agree))


def check_trial_count(n):
    if n < 0:
        raise InputError("trial count must be non-negative")
    return n
