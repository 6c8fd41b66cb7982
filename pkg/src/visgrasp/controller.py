"""Three-stage grasp controller driving a simulated six-DOF hand.

Stages run strictly in order: intent estimation (standby pose while the
target is being confirmed), grasping (angles follow the gesture function
of the hand-object distance), grip tightening (per-DOF force/contraction
locking), then done.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ClassNotFound,
    ComputationError,
    GestureMismatch,
    InputError,
    MissingLibraryEntry,
)
from .gesture import eval_gesture, library_lookup
from .intent import estimate_target, fit_trajectory_line


class Stage(str, enum.Enum):
    INTENT = "IntentEstimation"
    GRASPING = "Grasping"
    TIGHTENING = "GripTightening"
    DONE = "Done"

    @property
    def order(self):
        return list(Stage).index(self)


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    force_threshold: float = 4.0
    contraction_threshold: float = 5.0
    standby_pose: np.ndarray = None
    commit_count: int = 3
    actuator_time_constant: float = 0.1
    handedness: str = "right"
    # wrist displacement (m) from the first tracked position before an
    # estimate may count toward commitment
    min_travel: float = 0.15
    # angle tolerance (deg) for "reached" under a first-order-lag actuator
    reach_tol: float = 1e-3

    def __post_init__(self):
        if not self.force_threshold > 0:
            raise InputError("force threshold must be positive")
        if not self.contraction_threshold > 0:
            raise InputError("contraction threshold must be positive")
        if self.commit_count < 1:
            raise InputError("commit count must be at least 1")
        if self.actuator_time_constant < 0:
            raise InputError("actuator time constant must be non-negative")
        if self.handedness not in ("right", "left"):
            raise InputError(f"unknown handedness {self.handedness!r}")


@dataclass(frozen=True, eq=False)
class HandState:
    angles: np.ndarray
    forces: np.ndarray = field(default_factory=lambda: np.zeros(6))
    locked: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=bool))
    stage: Stage = Stage.INTENT
    lock_reason: tuple = (None,) * 6
    # intent bookkeeping
    candidate: str = None
    streak: int = 0
    target_id: str = None
    entry: object = None

    @classmethod
    def initial(cls, pose):
        return cls(angles=np.array(pose, dtype=float))


@dataclass(frozen=True, eq=False)
class ControlCommand:
    target_angles: np.ndarray
    stage: Stage
    selected_target: str = None


@dataclass(frozen=True, eq=False)
class Observation:
    wrist: np.ndarray
    track: np.ndarray
    objects: tuple
    library: object
    # set once the recorded reach is over and the wrist is at rest
    reach_complete: bool = False


@dataclass(frozen=True)
class Lock:
    reason: str


@dataclass(frozen=True)
class CloseFurther:
    target: float


@dataclass(frozen=True, eq=False)
class ContactModel:
    """Piecewise-linear finger/object contact.

    ``contact_angles`` holds one angle per DOF; ``inf`` means the DOF never
    touches the object.
    """

    contact_angles: np.ndarray
    stiffness: float = 1.0

    def forces(self, angles):
        pen = np.maximum(0.0, np.asarray(angles) - self.contact_angles)
        return self.stiffness * np.where(np.isfinite(pen), pen, 0.0)


def grip_tighten_dof(angle, final_angle, force, cfg: ControllerConfig):
    """Decide the next action for one DOF during grip tightening."""
    if force >= cfg.force_threshold:
        return Lock("force")
    limit = final_angle + cfg.contraction_threshold
    if angle >= limit - cfg.reach_tol:
        return Lock("limit")
    if angle >= final_angle - cfg.reach_tol:
        return CloseFurther(limit)
    return CloseFurther(final_angle)


def intent_update(track, objects, cfg: ControllerConfig, candidate, streak):
    """One intent-estimation tick: ``(estimate or None, candidate, streak)``."""
    track = np.asarray(track, dtype=float)
    if len(track) < 3 or np.linalg.norm(track[-1] - track[0]) < cfg.min_travel:
        return None, None, 0
    try:
        est = estimate_target(fit_trajectory_line(track), objects, cfg.handedness)
    except ComputationError:
        return None, None, 0
    streak = streak + 1 if est.target_id == candidate else 1
    return est, est.target_id, streak


def _commit(state, obs, cfg):
    by_id = {o.id: o for o in obs.objects}
    target = by_id[state.candidate]
    try:
        entry = library_lookup(obs.library, target.object_class, target.size, target.cloud)
    except (ClassNotFound, GestureMismatch) as exc:
        raise MissingLibraryEntry(
            f"committed target {target.id!r} has no valid gesture function: {exc}") from exc
    return replace(state, stage=Stage.GRASPING, target_id=target.id, entry=entry)


def controller_step(state: HandState, obs: Observation, cfg: ControllerConfig, dt):
    """Advance the state machine by one observation.

    Returns ``(new_state, command)``.  The hand's measured angles and forces
    are read from ``state``; actuation happens in ``simulate_hand``.
    """
    if not dt > 0:
        raise InputError("time step must be positive")
    standby = cfg.standby_pose if cfg.standby_pose is not None else state.angles
    target = np.array(standby, dtype=float)

    if state.stage is Stage.INTENT:
        _, candidate, streak = intent_update(obs.track, obs.objects, cfg,
                                             state.candidate, state.streak)
        state = replace(state, candidate=candidate, streak=streak)
        if streak >= cfg.commit_count:
            state = _commit(state, obs, cfg)

    if state.stage is Stage.GRASPING:
        f = state.entry.function
        obj = next(o for o in obs.objects if o.id == state.target_id)
        d = float(np.linalg.norm(np.asarray(obs.wrist) - obj.position))
        target = eval_gesture(f, d)
        if d <= f.d_end + 1e-9 or obs.reach_complete:
            state = replace(state, stage=Stage.TIGHTENING)

    if state.stage is Stage.TIGHTENING:
        final = state.entry.function.final_angles()
        locked = state.locked.copy()
        reasons = list(state.lock_reason)
        target = np.empty(6)
        for j in range(6):
            if locked[j]:
                target[j] = state.angles[j]
                continue
            action = grip_tighten_dof(state.angles[j], final[j], state.forces[j], cfg)
            if isinstance(action, Lock):
                locked[j] = True
                reasons[j] = action.reason
                target[j] = state.angles[j]
            else:
                target[j] = action.target
        stage = Stage.DONE if locked.all() else Stage.TIGHTENING
        state = replace(state, locked=locked, lock_reason=tuple(reasons), stage=stage)
    elif state.stage is Stage.DONE:
        target = state.angles.copy()

    selected = state.target_id if state.target_id is not None else state.candidate
    return state, ControlCommand(target, state.stage, selected)


def simulate_hand(state: HandState, cmd: ControlCommand, contact: ContactModel, dt,
                  time_constant=0.1) -> HandState:
    """First-order-lag actuators plus contact forces; locked DOFs never move."""
    if dt < 0:
        raise InputError("time step must be non-negative")
    if dt == 0:
        return state
    free = ~state.locked
    angles = state.angles.copy()
    if time_constant <= 0:
        angles[free] = cmd.target_angles[free]
    else:
        gain = 1.0 - np.exp(-dt / time_constant)
        angles[free] += gain * (cmd.target_angles[free] - angles[free])
    return replace(state, angles=angles, forces=contact.forces(angles))
