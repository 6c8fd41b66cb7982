"""Wrist-trajectory regression and target selection.

The wrist track is regressed as the intersection of two least-squares
planes, each expressing one coordinate as an affine function of the other
two.  A separation plane through that line and the camera's +y axis splits
the scene; for a right hand the target is the object nearest the line on
the ``ws . p > 0`` side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDirection,
    InputError,
    NoObjects,
    ParallelPlanes,
    TooFewPositions,
)
from .geometry import SizeParams
from .registration import register_clouds, validate_gesture_entry  # noqa: F401  (re-export)

COND_LIMIT = 1e10
Y_AXIS = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True, eq=False)
class RegressionLine:
    point: np.ndarray
    direction: np.ndarray
    plane1_w: np.ndarray
    plane2_w: np.ndarray
    # coordinate index each plane solves for; (0, 1) is the x/y pair used
    # whenever the track advances mostly along z
    dependent_axes: tuple = (0, 1)

    def distance(self, p) -> float:
        rel = np.asarray(p, dtype=float) - self.point
        return float(np.linalg.norm(rel - (rel @ self.direction) * self.direction))


@dataclass(frozen=True, eq=False)
class SeparationPlane:
    ws: np.ndarray

    def side(self, p) -> float:
        return float(self.ws[:3] @ np.asarray(p, dtype=float) + self.ws[3])


@dataclass(frozen=True, eq=False)
class SceneObject:
    id: str
    object_class: str
    position: np.ndarray
    size: SizeParams = None
    cloud: np.ndarray = None


@dataclass(frozen=True)
class IntentEstimate:
    target_id: str
    # point-to-line distance for the regression method, hand-to-center
    # distance for the sphere baseline
    line_distance: float
    in_left_space: bool
    confidence: float
    fallback_used: bool


def _regress_plane(dep, cols):
    """Least-squares ``dep = w1*c1 + w2*c2 + w0``.

    Normal equations when well conditioned, otherwise the minimum-norm
    solution (exactly collinear tracks make the design rank deficient).
    """
    a = np.column_stack([cols[0], cols[1], np.ones_like(dep)])
    ata = a.T @ a
    if np.linalg.cond(ata) <= COND_LIMIT:
        return np.linalg.solve(ata, a.T @ dep)
    return np.linalg.lstsq(a, dep, rcond=np.sqrt(1.0 / COND_LIMIT))[0]


def _plane_normal(axis, w):
    others = [k for k in range(3) if k != axis]
    n = np.zeros(3)
    n[axis] = 1.0
    n[others[0]] = -w[0]
    n[others[1]] = -w[1]
    return n, w[2]


def fit_trajectory_line(positions) -> RegressionLine:
    """Regression line of an ``(n, 3)`` wrist track, oriented along the motion."""
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InputError("positions must be (n, 3)")
    if len(pts) < 3:
        raise TooFewPositions(f"need at least 3 wrist positions, got {len(pts)}")
    pivot = int(np.argmax(pts.std(axis=0)))
    if pivot == 2 or pts.std(axis=0)[pivot] == pts.std(axis=0)[2]:
        dependent = (0, 1)
    else:
        dependent = tuple(k for k in range(3) if k != pivot)

    ws, normals, offsets = [], [], []
    for axis in dependent:
        others = [k for k in range(3) if k != axis]
        w = _regress_plane(pts[:, axis], (pts[:, others[0]], pts[:, others[1]]))
        n, o = _plane_normal(axis, w)
        ws.append(w)
        normals.append(n)
        offsets.append(o)

    direction = np.cross(normals[0], normals[1])
    norm = np.linalg.norm(direction)
    if norm <= 1e-9 * np.linalg.norm(normals[0]) * np.linalg.norm(normals[1]):
        raise ParallelPlanes("regression planes are parallel")
    direction = direction / norm
    if direction @ (pts[-1] - pts[0]) < 0:
        direction = -direction

    p0 = np.linalg.lstsq(np.vstack(normals), np.array(offsets), rcond=None)[0]
    centroid = pts.mean(axis=0)
    point = p0 + ((centroid - p0) @ direction) * direction
    return RegressionLine(point, direction, np.array(ws[0]), np.array(ws[1]), dependent)


def principal_axis_line(positions):
    """Total-least-squares line (centroid, unit direction along the motion)."""
    pts = np.asarray(positions, dtype=float)
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid)
    d = vt[0]
    if d @ (pts[-1] - pts[0]) < 0:
        d = -d
    return centroid, d


def separation_plane(line: RegressionLine) -> SeparationPlane:
    d = line.direction
    if abs(d @ Y_AXIS) >= np.cos(1e-6):
        raise DegenerateDirection("trajectory is parallel to the y axis")
    n = np.cross(d, Y_AXIS)
    n = n / np.linalg.norm(n)
    if abs(n[0]) < 1e-12:
        raise DegenerateDirection("trajectory has no forward component")
    if n[0] > 0:
        n = -n
    return SeparationPlane(np.array([n[0], n[1], n[2], -(n @ line.point)]))


def _confidence(best, others):
    if not others:
        return 1.0
    runner = min(others)
    if best + runner == 0:
        return 0.5
    return 1.0 - best / (best + runner)


def _check_handedness(handedness):
    if handedness not in ("right", "left"):
        raise InputError(f"handedness must be 'right' or 'left', got {handedness!r}")


def estimate_target(line: RegressionLine, objects, handedness="right") -> IntentEstimate:
    objects = list(objects)
    if not objects:
        raise NoObjects("no candidate objects")
    _check_handedness(handedness)
    plane = separation_plane(line)
    sign = 1.0 if handedness == "right" else -1.0
    scored = [(line.distance(o.position), o.id, sign * plane.side(o.position) > 0)
              for o in objects]
    pool = [s for s in scored if s[2]]
    fallback = not pool
    if fallback:
        pool = scored
    pool.sort(key=lambda s: (s[0], s[1]))
    dist, target_id, left = pool[0]
    rest = [s[0] for s in pool[1:]] or [s[0] for s in scored if s[1] != target_id]
    return IntentEstimate(target_id, dist, left, _confidence(dist, rest), fallback)


def estimate_target_sphere_baseline(hand, objects, radius) -> IntentEstimate:
    """Nearest object whose equal-radius sphere contains the hand."""
    objects = list(objects)
    if not objects:
        raise NoObjects("no candidate objects")
    if not radius > 0:
        raise InputError("sphere radius must be positive")
    hand = np.asarray(hand, dtype=float)
    scored = sorted((float(np.linalg.norm(o.position - hand)), o.id) for o in objects)
    inside = [s for s in scored if s[0] <= radius]
    fallback = not inside
    pool = scored if fallback else inside
    dist, target_id = pool[0]
    rest = [s[0] for s in scored if s[1] != target_id]
    return IntentEstimate(target_id, dist, False, _confidence(dist, rest), fallback)
