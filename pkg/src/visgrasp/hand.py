"""Hand keypoints to palm plane and the six-DOF grasp angle vector.

Keypoint ordering is the usual 21-point layout: 0 wrist, 1-4 thumb
(CMC to tip), 5-8 index (MCP to tip), 9-12 middle, 13-16 ring, 17-20 pinky.

Angle vectors are ``(6,)`` arrays in degrees ordered ``p, r, m, i, tb, tr``
(pinky, ring, middle, index, thumb bend, thumb rotation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CollinearPalm, DegenerateBox, InputError, ZeroLengthSegment
from .geometry import BoundingBox2D

DOF_NAMES = ("p", "r", "m", "i", "tb", "tr")
PALM_IDX = (0, 5, 9, 13, 17)
# (MCP, fingertip) pairs in angle-vector order p, r, m, i
FINGER_SEGMENTS = ((17, 20), (13, 16), (9, 12), (5, 8))
THUMB_SEGMENT = (1, 4)
THUMB_AXIS = (1, 5)


@dataclass(frozen=True)
class PalmPlane:
    normal: np.ndarray
    offset: float

    def signed_distance(self, p):
        return float(self.normal @ np.asarray(p, dtype=float) - self.offset)


def as_keypoints(kp) -> np.ndarray:
    kp = np.asarray(kp, dtype=float)
    if kp.shape != (21, 3):
        raise InputError(f"expected 21x3 hand keypoints, got {kp.shape}")
    if not np.all(np.isfinite(kp)):
        raise InputError("hand keypoints must be finite")
    return kp


def reshape_bbox(bbox: BoundingBox2D) -> BoundingBox2D:
    """Square box on the longest side, sharing the input's centroid."""
    if not (bbox.w > 0 and bbox.h > 0):
        raise DegenerateBox(f"box has non-positive size {bbox.w}x{bbox.h}")
    side = max(bbox.w, bbox.h)
    cu, cv = bbox.center
    return BoundingBox2D(cu - side / 2.0, cv - side / 2.0, side, side)


def fit_palm_plane(kp) -> PalmPlane:
    kp = as_keypoints(kp)
    pts = kp[list(PALM_IDX)]
    centroid = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - centroid)
    if not (s[0] > 1e-9 and s[1] > 1e-9):
        raise CollinearPalm("palm keypoints are collinear")
    normal = vt[2]
    # back of the hand
    orient = np.cross(kp[5] - kp[0], kp[17] - kp[0])
    if normal @ orient < 0:
        normal = -normal
    normal = normal / np.linalg.norm(normal)
    return PalmPlane(normal, float(normal @ centroid))


def _segment(kp, a, b):
    seg = kp[b] - kp[a]
    length = np.linalg.norm(seg)
    if length == 0:
        raise ZeroLengthSegment(f"keypoints {a} and {b} coincide")
    return seg / length


def _plane_angle(unit_seg, palmar):
    return np.degrees(np.arcsin(np.clip(unit_seg @ palmar, -1.0, 1.0)))


def extract_angle_vector(kp) -> np.ndarray:
    """Finger flexion against the palm plane plus the two thumb angles.

    Flexion toward the palm (against the oriented normal) is positive.
    """
    kp = as_keypoints(kp)
    palmar = -fit_palm_plane(kp).normal
    out = np.empty(6)
    for j, (a, b) in enumerate(FINGER_SEGMENTS):
        out[j] = _plane_angle(_segment(kp, a, b), palmar)
    thumb = _segment(kp, *THUMB_SEGMENT)
    axis = _segment(kp, *THUMB_AXIS)
    out[4] = np.degrees(np.arccos(np.clip(thumb @ axis, -1.0, 1.0)))
    out[5] = _plane_angle(thumb, palmar)
    return out


# Reference hand in a local frame: x distal, y lateral toward the thumb, z
# completes a right-handed frame.  Palm points lie in z = 0.
_MCP = {5: (0.090, 0.030), 9: (0.095, 0.010), 13: (0.090, -0.010), 17: (0.080, -0.030)}
_FINGER_LEN = {5: 0.075, 9: 0.085, 13: 0.080, 17: 0.062}
_THUMB_CMC = (0.030, 0.035)
_THUMB_LEN = 0.070


def synthesize_keypoints(angles, wrist, rotation=None) -> np.ndarray:
    """Build 21 keypoints whose extracted angle vector equals ``angles``.

    ``rotation`` maps the local hand frame into the world (identity when
    omitted).  Raises ``InputError`` when the thumb pair is geometrically
    infeasible, i.e. ``cos(tb)**2 + sin(tr)**2 > 1``.
    """
    angles = np.asarray(angles, dtype=float)
    rad = np.radians(angles)
    kp = np.zeros((21, 3))
    for mcp, (x, y) in _MCP.items():
        kp[mcp] = (x, y, 0.0)
    kp[1] = (*_THUMB_CMC, 0.0)
    back = np.cross(kp[5] - kp[0], kp[17] - kp[0])
    palmar = -back / np.linalg.norm(back)
    for j, (mcp, tip) in enumerate(FINGER_SEGMENTS):
        distal = np.array([1.0, 0.0, 0.0])
        seg = _FINGER_LEN[mcp] * (np.cos(rad[j]) * distal + np.sin(rad[j]) * palmar)
        for step, idx in enumerate(range(mcp + 1, tip + 1), start=1):
            kp[idx] = kp[mcp] + seg * step / 3.0

    axis = (kp[5] - kp[1]) / np.linalg.norm(kp[5] - kp[1])
    outward = np.cross(palmar, axis)
    if outward[1] < 0:
        outward = -outward
    ca, sr = np.cos(rad[4]), np.sin(rad[5])
    rest = 1.0 - ca * ca - sr * sr
    if rest < -1e-12:
        raise InputError(f"thumb angles tb={angles[4]} tr={angles[5]} are infeasible")
    thumb = ca * axis + sr * palmar + np.sqrt(max(rest, 0.0)) * outward
    for step, idx in enumerate((2, 3, 4), start=1):
        kp[idx] = kp[1] + _THUMB_LEN * thumb * step / 3.0

    if rotation is not None:
        kp = kp @ np.asarray(rotation, dtype=float).T
    return kp + np.asarray(wrist, dtype=float)
