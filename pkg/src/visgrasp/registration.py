"""Rigid cloud registration and the gesture-entry compatibility gate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, TooFewPoints
from .geometry import SizeParams, as_cloud

GATE_FRACTION = 0.10


@dataclass
class Registration:
    rotation: np.ndarray
    translation: np.ndarray
    rmse: float
    history: list = field(default_factory=list)

    @property
    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, cloud):
        return np.asarray(cloud) @ self.rotation.T + self.translation


def kabsch(src, dst):
    """Least-squares rotation and translation taking ``src`` onto ``dst``."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, cd - rot @ cs


def symmetric_rmse(a, b, tree_a=None, tree_b=None):
    """RMSE of nearest-neighbour distances taken in both directions."""
    tree_a = tree_a if tree_a is not None else cKDTree(a)
    tree_b = tree_b if tree_b is not None else cKDTree(b)
    dab, _ = tree_b.query(a)
    dba, _ = tree_a.query(b)
    return float(np.sqrt((np.sum(dab ** 2) + np.sum(dba ** 2)) / (len(a) + len(b))))


def _principal_axes(cloud):
    c = cloud - cloud.mean(axis=0)
    _, vecs = np.linalg.eigh(c.T @ c / len(cloud))
    return vecs[:, ::-1]


def coarse_hypotheses(source, target):
    """Candidate rotations: identity plus the four proper axis-sign matchings."""
    es, et = _principal_axes(source), _principal_axes(target)
    hyps = [np.eye(3)]
    for s0 in (1.0, -1.0):
        for s1 in (1.0, -1.0):
            s = np.diag([s0, s1, 1.0])
            rot = et @ s @ es.T
            if np.linalg.det(rot) < 0:
                s[2, 2] = -1.0
                rot = et @ s @ es.T
            hyps.append(rot)
    return hyps


def register_clouds(source, target, max_iter=50, rel_tol=1e-8) -> Registration:
    """Align ``source`` onto ``target``: sign-hypothesis coarse stage, then ICP.

    The coarse stage scores each hypothesis by nearest-neighbour RMSE after
    centroid alignment and keeps the best one.  ``history`` holds the
    one-sided ICP RMSE per iteration; the returned ``rmse`` is the
    symmetric nearest-neighbour RMSE of the final alignment.
    """
    source, target = as_cloud(source), as_cloud(target)
    if len(source) < 4 or len(target) < 4:
        raise TooFewPoints("registration needs at least 4 points per cloud")
    tree_t = cKDTree(target)
    cs, ct = source.mean(axis=0), target.mean(axis=0)

    best = None
    for rot in coarse_hypotheses(source, target):
        t = ct - rot @ cs
        moved = source @ rot.T + t
        score = symmetric_rmse(moved, target, tree_b=tree_t)
        if best is None or score < best[0]:
            best = (score, rot, t)
    _, rot, t = best

    history = []
    prev = None
    for _ in range(max_iter):
        moved = source @ rot.T + t
        dist, idx = tree_t.query(moved)
        err = float(np.sqrt(np.mean(dist ** 2)))
        history.append(err)
        if err < 1e-15:
            break
        if prev is not None and abs(prev - err) <= rel_tol * prev:
            break
        prev = err
        rot, t = kabsch(source, target[idx])
    moved = source @ rot.T + t
    return Registration(rot, t, symmetric_rmse(moved, target, tree_b=tree_t), history)


def size_discrepancy(a: SizeParams, b: SizeParams) -> float:
    """Largest difference of the sorted extents (orientation-free)."""
    return float(np.max(np.abs(np.sort(a.extents) - np.sort(b.extents))))


@dataclass(frozen=True)
class GateResult:
    ok: bool
    rmse: float

    def __bool__(self):
        return self.ok


def validate_gesture_entry(entry, obs_cloud, obs_size: SizeParams) -> GateResult:
    """Check that a library entry's object matches the observed one.

    With a model cloud the clouds are registered and the symmetric RMSE is
    compared against 10% of the observed bounding-sphere radius; without one
    the sorted extents are compared against the same bound.
    """
    limit = GATE_FRACTION * obs_size.radius
    if entry.model_cloud is not None and obs_cloud is not None:
        rmse = register_clouds(entry.model_cloud, obs_cloud).rmse
    elif entry.size is not None:
        rmse = size_discrepancy(entry.size, obs_size)
    else:
        raise InputError("library entry has neither a model cloud nor a size")
    return GateResult(rmse <= limit, rmse)
