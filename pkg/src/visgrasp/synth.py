"""Seeded synthetic episodes and scenes.

The object catalog holds eight household objects.  Each class has a
box-shaped extent, an end-of-reach distance and a final grasp pose;
generating gesture functions blend a shared semi-closed start pose into that
final pose with smooth quartic profiles.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InputError, UnknownTarget
from .episode import EpisodeMeta, EpisodeRecord, Frame, SceneItem, SceneSpec
from .geometry import CameraIntrinsics, object_size
from .gesture import GestureFunction, eval_gesture
from .hand import synthesize_keypoints
from .intent import SceneObject

START_DISTANCE = 0.45
DEFAULT_CAMERA = CameraIntrinsics(615.0, 615.0, 320.0, 240.0, 640, 480)
# shared start pose p, r, m, i, tb, tr (deg)
START_POSE = np.array([20.0, 20.0, 20.0, 20.0, 55.0, 10.0])


@dataclass(frozen=True)
class ObjectClass:
    name: str
    extents: tuple
    d_end: float
    final_pose: tuple
    # final minus contact angle per DOF (deg); None = finger misses the object
    contact_offsets: tuple


_POWER = (6.0, 6.0, 6.0, 6.0, 2.0, None)

CATALOG = {c.name: c for c in (
    ObjectClass("apple", (0.082, 0.078, 0.074), 0.070, (55, 55, 52, 50, 70, 30), _POWER),
    ObjectClass("bottle", (0.068, 0.220, 0.064), 0.060, (65, 65, 62, 60, 72, 35), _POWER),
    ObjectClass("bowl", (0.150, 0.070, 0.146), 0.090, (35, 35, 32, 30, 62, 20), _POWER),
    ObjectClass("carrot", (0.180, 0.035, 0.030), 0.050, (70, 68, 66, 62, 75, 32), _POWER),
    ObjectClass("cup", (0.085, 0.100, 0.080), 0.065, (60, 58, 56, 54, 70, 30), _POWER),
    ObjectClass("fork", (0.190, 0.020, 0.026), 0.045, (75, 72, 45, 40, 68, 25),
                (None, None, 1.0, 6.0, 2.0, None)),
    ObjectClass("mouse", (0.065, 0.040, 0.110), 0.050, (30, 30, 28, 26, 60, 15), _POWER),
    ObjectClass("pitcher", (0.160, 0.200, 0.140), 0.100, (62, 62, 60, 58, 74, 34), _POWER),
)}


def _smoothstep(u):
    return 3 * u ** 2 - 2 * u ** 3


def _quartic_ease(u):
    return 2 * u ** 2 - u ** 4


# progress profile per DOF
_PROFILES = (_smoothstep, _smoothstep, _smoothstep, _quartic_ease, _quartic_ease, _quartic_ease)


def class_gesture(name, d_start=START_DISTANCE) -> GestureFunction:
    """Generating gesture function of a catalog class."""
    kind = CATALOG[name]
    # progress u = 0 at d_start, 1 at d_end, as a polynomial in distance
    span = d_start - kind.d_end
    u = Polynomial([d_start / span, -1.0 / span])
    rows = []
    for j, profile in enumerate(_PROFILES):
        poly = START_POSE[j] + (kind.final_pose[j] - START_POSE[j]) * profile(u)
        c = np.zeros(5)
        coef = poly.coef[::-1]
        c[5 - len(coef):] = coef
        rows.append(c)
    return GestureFunction(np.array(rows), (kind.d_end, d_start))


def contact_angles(name) -> np.ndarray:
    kind = CATALOG[name]
    return np.array([np.inf if off is None else kind.final_pose[j] - off
                     for j, off in enumerate(kind.contact_offsets)])


def object_cloud(name, extents=None, n=400) -> np.ndarray:
    """Deterministic box-surface samples centred on the origin."""
    ext = tuple(float(x) for x in (extents if extents is not None else CATALOG[name].extents))
    return _box_cloud(name, ext, n).copy()


@lru_cache(maxsize=256)
def _box_cloud(name, ext, n):
    ext = np.asarray(ext)
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    half = ext / 2.0
    areas = np.array([ext[1] * ext[2], ext[0] * ext[2], ext[0] * ext[1]])
    axes = rng.choice(3, size=n, p=areas / areas.sum())
    pts = rng.uniform(-half, half, size=(n, 3))
    signs = rng.choice([-1.0, 1.0], size=n)
    pts[np.arange(n), axes] = signs * half[axes]
    return pts


def scene_objects(scene: SceneSpec):
    out = []
    for item in scene.objects:
        cloud = object_cloud(item.object_class, item.extents) + item.position
        out.append(SceneObject(item.id, item.object_class, item.position.copy(),
                               object_size(cloud), cloud))
    return tuple(out)


def single_object_scene(name, position=(0.0, 0.2, 0.7)) -> SceneSpec:
    kind = CATALOG[name]
    item = SceneItem("obj0", name, np.array(position, dtype=float),
                     np.array(kind.extents), contact_angles(name))
    return SceneSpec((item,), 0.0, 0)


def make_scene(spacing, seed, n_objects=3, classes=None, center=(0.0, 0.2, 0.7),
               start_distance=START_DISTANCE) -> SceneSpec:
    """Objects in a row along x at ``spacing``; the hand starts in front of the middle."""
    rng = np.random.default_rng(seed)
    pool = sorted(classes or CATALOG)
    picked = rng.choice(pool, size=n_objects, replace=False)
    center = np.asarray(center, dtype=float)
    items = []
    for k, name in enumerate(picked):
        offset = (k - (n_objects - 1) / 2.0) * spacing
        pos = center + np.array([offset, 0.0, 0.0])
        items.append(SceneItem(f"obj{k}", str(name), pos, np.array(CATALOG[name].extents),
                               contact_angles(str(name))))
    start = center - np.array([0.0, 0.0, start_distance])
    return SceneSpec(tuple(items), float(spacing), int(seed), start)


@dataclass(frozen=True)
class Trajectory:
    start: tuple = None
    duration: float = 1.5
    fps: float = 30.0
    # grasp point is this far from the target center (defaults to the
    # gesture function's end distance), rotated toward +x by this angle
    end_distance: float = None
    approach_angle_deg: float = 35.0


@dataclass(frozen=True)
class Noise:
    pos_sigma: float = 0.0
    angle_sigma: float = 0.0


def _hand_rotation(direction):
    distal = direction / np.linalg.norm(direction)
    lateral = np.array([0.0, -1.0, 0.0])
    lateral = lateral - (lateral @ distal) * distal
    lateral /= np.linalg.norm(lateral)
    return np.column_stack([distal, lateral, np.cross(distal, lateral)])


def grasp_point(target_pos, start, end_distance, approach_angle_deg):
    back = np.asarray(start, dtype=float) - target_pos
    back[1] = 0.0
    back /= np.linalg.norm(back)
    a = np.radians(approach_angle_deg)
    # rotate about y so the grasp point moves toward +x
    rot = np.array([[np.cos(a), 0.0, np.sin(a)], [0.0, 1.0, 0.0], [-np.sin(a), 0.0, np.cos(a)]])
    g = rot @ back
    if g[0] < back[0]:
        g = rot.T @ back
    return target_pos + end_distance * g


def generate_synthetic_episode(scene: SceneSpec, target_id, trajectory: Trajectory,
                               gesture: GestureFunction = None, noise: Noise = Noise(),
                               seed=0, camera=DEFAULT_CAMERA, episode_id=None) -> EpisodeRecord:
    """Straight-line reach toward ``target_id`` with optional hand keypoints.

    Keypoints are synthesized only when ``gesture`` is given; their angle
    vector equals the gesture function at the true (noise-free) distance,
    plus angle noise.  Wrist positions carry Gaussian position noise.
    """
    item = scene.item(target_id)
    if item is None:
        raise UnknownTarget(f"no object {target_id!r} in scene")
    if not trajectory.fps > 0:
        raise InputError("fps must be positive")
    rng = np.random.default_rng(seed)
    objects = scene_objects(scene)
    target = next(o for o in objects if o.id == target_id)

    if trajectory.start is not None:
        start = np.asarray(trajectory.start, dtype=float)
    elif scene.hand_start is not None:
        start = scene.hand_start
    else:
        start = target.position + START_DISTANCE * np.array([0.25, 0.0, -1.0]) / np.hypot(0.25, 1.0)
    end_distance = trajectory.end_distance
    if end_distance is None:
        if gesture is not None:
            end_distance = gesture.d_end
        elif item.object_class in CATALOG:
            end_distance = CATALOG[item.object_class].d_end
        else:
            end_distance = max(0.04, 0.5 * float(np.max(item.extents)))
    goal = grasp_point(target.position, start, end_distance, trajectory.approach_angle_deg)

    n = int(round(trajectory.duration * trajectory.fps))
    if n < 1:
        raise InputError("trajectory too short for a single frame")
    s = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    true_wrist = start + s[:, None] * (goal - start)
    wrist = true_wrist + rng.normal(0.0, noise.pos_sigma, size=true_wrist.shape) \
        if noise.pos_sigma > 0 else true_wrist
    angle_noise = rng.normal(0.0, noise.angle_sigma, size=(n, 6)) \
        if noise.angle_sigma > 0 else np.zeros((n, 6))
    rotation = _hand_rotation(goal - start)

    frames = []
    for k in range(n):
        kp = None
        if gesture is not None:
            d = np.linalg.norm(true_wrist[k] - target.position)
            angles = eval_gesture(gesture, d) + angle_noise[k]
            # keep the thumb pair feasible under noise
            angles[4] = max(angles[4], abs(angles[5]))
            kp = synthesize_keypoints(angles, wrist[k], rotation)
        frames.append(Frame(k / trajectory.fps, wrist[k].copy(), objects, kp))
    meta = EpisodeMeta(episode_id or f"synthetic-{item.object_class}-{seed}", "right",
                       float(trajectory.fps), item.object_class, target_id)
    return EpisodeRecord(meta, camera, tuple(frames))


def modeling_episode(name, seed=0, noise: Noise = Noise(), duration=1.5, fps=30.0):
    """Single-object demonstration reach for one catalog class."""
    scene = single_object_scene(name)
    return generate_synthetic_episode(scene, "obj0", Trajectory(duration=duration, fps=fps),
                                      class_gesture(name), noise, seed,
                                      episode_id=f"model-{name}")
