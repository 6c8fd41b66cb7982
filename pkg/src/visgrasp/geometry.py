"""Pinhole backprojection, object cloud extraction and size measurement.

Points are plain ``numpy`` arrays of shape ``(3,)`` and clouds are ``(N, 3)``
arrays, all in meters in the camera frame of the first episode frame
(x right, y down, z forward).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyCloud,
    EmptyRegion,
    EmptyResult,
    InputError,
    NonPositiveDepth,
    OutOfImage,
    TooFewPoints,
)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    px: float
    py: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError("focal lengths must be positive")
        if not (0 <= self.px < self.width and 0 <= self.py < self.height):
            raise InputError("principal point must lie inside the image")

    def project(self, point):
        """Pixel coordinates of a camera-frame point (inverse of backproject)."""
        x, y, z = np.asarray(point, dtype=float)
        return x / z * self.fx + self.px, y / z * self.fy + self.py

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "px": self.px, "py": self.py,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["fx"]), float(d["fy"]), float(d["px"]), float(d["py"]),
                   int(d["width"]), int(d["height"]))


@dataclass(frozen=True)
class BoundingBox2D:
    u: float
    v: float
    w: float
    h: float

    @property
    def center(self):
        return self.u + self.w / 2.0, self.v + self.h / 2.0

    def clamp(self, width, height):
        """Intersection with the image, or None when empty."""
        u0, v0 = max(self.u, 0.0), max(self.v, 0.0)
        u1, v1 = min(self.u + self.w, width), min(self.v + self.h, height)
        if u1 <= u0 or v1 <= v0:
            return None
        return BoundingBox2D(u0, v0, u1 - u0, v1 - v0)

    def as_list(self):
        return [self.u, self.v, self.w, self.h]


@dataclass(frozen=True, eq=False)
class SizeParams:
    extents: np.ndarray
    radius: float
    centroid: np.ndarray

    def to_dict(self):
        return {"extents": [float(e) for e in self.extents],
                "radius": float(self.radius),
                "centroid": [float(c) for c in self.centroid]}

    @classmethod
    def from_dict(cls, d):
        extents = np.asarray(d["extents"], dtype=float)
        centroid = np.asarray(d["centroid"], dtype=float)
        if extents.shape != (3,) or centroid.shape != (3,):
            raise InputError("size extents and centroid need 3 components")
        return cls(extents, float(d["radius"]), centroid)


def as_cloud(points) -> np.ndarray:
    cloud = np.asarray(points, dtype=float)
    if cloud.ndim != 2 or cloud.shape[1] != 3:
        raise InputError(f"point cloud must have shape (N, 3), got {cloud.shape}")
    if not np.all(np.isfinite(cloud)):
        raise InputError("point cloud contains non-finite points")
    return cloud


def backproject(u, v, depth, cam: CameraIntrinsics) -> np.ndarray:
    if not depth > 0:
        raise NonPositiveDepth(f"depth must be positive, got {depth}")
    if not (0 <= u < cam.width and 0 <= v < cam.height):
        raise OutOfImage(f"pixel ({u}, {v}) outside {cam.width}x{cam.height} image")
    z = float(depth)
    return np.array([(u - cam.px) / cam.fx * z, (v - cam.py) / cam.fy * z, z])


def extract_region_cloud(depth_map, bbox: BoundingBox2D, cam: CameraIntrinsics) -> np.ndarray:
    """Backproject every valid pixel inside ``bbox``.

    Depth 0 marks a missing measurement and is skipped, as are non-finite
    values.
    """
    depth_map = np.asarray(depth_map, dtype=float)
    if depth_map.shape != (cam.height, cam.width):
        raise InputError(
            f"depth map shape {depth_map.shape} does not match camera "
            f"{cam.height}x{cam.width}")
    box = bbox.clamp(cam.width, cam.height)
    if box is None:
        raise EmptyRegion("bounding box does not intersect the image")
    u0, v0 = int(np.floor(box.u)), int(np.floor(box.v))
    u1, v1 = int(np.ceil(box.u + box.w)), int(np.ceil(box.v + box.h))
    patch = depth_map[v0:v1, u0:u1]
    vv, uu = np.nonzero(np.isfinite(patch) & (patch > 0))
    if len(vv) == 0:
        raise EmptyRegion("no valid depth inside the bounding box")
    z = patch[vv, uu]
    u = uu + u0
    v = vv + v0
    x = (u - cam.px) / cam.fx * z
    y = (v - cam.py) / cam.fy * z
    return np.column_stack([x, y, z])


def depth_threshold_filter(cloud, ref_center, obj_width) -> np.ndarray:
    """Keep points whose depth is within twice the object width of the reference."""
    if not obj_width > 0:
        raise InputError("object width must be positive")
    cloud = as_cloud(cloud)
    keep = np.abs(cloud[:, 2] - ref_center[2]) <= 2.0 * obj_width
    if not keep.any():
        raise EmptyResult("depth threshold removed every point")
    return cloud[keep]


def bootstrap_width(bbox: BoundingBox2D, cam: CameraIntrinsics, depths) -> float:
    """Metric width estimate used before any clean cloud exists."""
    return bbox.w / cam.fx * float(np.median(depths))


def _kmeans_pp_init(points, k, rng):
    centers = [points[rng.integers(len(points))]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.asarray(centers)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total == 0:
            centers.append(points[rng.integers(len(points))])
        else:
            centers.append(points[rng.choice(len(points), p=d2 / total)])
    return np.asarray(centers)


def kmeans(points, k, seed, max_iter=50, tol=1e-6):
    """Plain Lloyd iterations with k-means++ seeding.

    Returns ``(labels, centers)``.
    """
    points = as_cloud(points)
    if k < 1:
        raise InputError("k must be at least 1")
    if len(points) < k:
        raise TooFewPoints(f"need at least {k} points, got {len(points)}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)
    labels = np.zeros(len(points), dtype=int)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None]) ** 2).sum(-1)
        labels = np.argmin(d2, axis=1)
        new = centers.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        shift = np.max(np.linalg.norm(new - centers, axis=1))
        centers = new
        if shift < tol:
            break
    labels = np.argmin(((points[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    return labels, centers


def kmeans_segment(cloud, k, ref_point, seed) -> np.ndarray:
    """Return the K-means cluster whose centroid is nearest to ``ref_point``."""
    cloud = as_cloud(cloud)
    labels, centers = kmeans(cloud, k, seed)
    occupied = [j for j in range(len(centers)) if np.any(labels == j)]
    dist = [np.linalg.norm(centers[j] - np.asarray(ref_point, dtype=float)) for j in occupied]
    best = occupied[int(np.argmin(dist))]
    return cloud[labels == best]


def object_size(cloud) -> SizeParams:
    if np.asarray(cloud).size == 0:
        raise EmptyCloud("cannot measure an empty cloud")
    cloud = as_cloud(cloud)
    if len(cloud) == 0:
        raise EmptyCloud("cannot measure an empty cloud")
    extents = cloud.max(axis=0) - cloud.min(axis=0)
    centroid = cloud.mean(axis=0)
    radius = float(np.max(np.linalg.norm(cloud - centroid, axis=1)))
    return SizeParams(extents, radius, centroid)


def reconstruct_object(depth_map, bbox: BoundingBox2D, cam: CameraIntrinsics,
                       k=2, seed=0, obj_width=None):
    """ROI crop, depth band and K-means cleanup of one detected object.

    Returns ``(cloud, position, size)`` where ``position`` is the backprojected
    bounding-box center at the median ROI depth.
    """
    raw = extract_region_cloud(depth_map, bbox, cam)
    box = bbox.clamp(cam.width, cam.height)
    cu, cv = box.center
    cu = min(cu, cam.width - 1)
    cv = min(cv, cam.height - 1)
    median_depth = float(np.median(raw[:, 2]))
    position = backproject(cu, cv, median_depth, cam)
    if obj_width is None:
        obj_width = bootstrap_width(box, cam, raw[:, 2])
    band = depth_threshold_filter(raw, position, obj_width)
    clean = kmeans_segment(band, min(k, len(band)), position, seed)
    return clean, position, object_size(clean)
