"""Laser-scan projection and segment-averaged ground-truth depth.

Points live in sensor coordinates and move to the camera frame through a
rigid transform; in-frustum points project to pixel coordinates with their
ray distance (not z), matching the depth convention everywhere else.
Ground truth per region comes from averaging the laser hits inside the
region over a centered 5-frame window; regions with no hits are invalid.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .geometry import DepthMap

LIDAR_MAX_RANGE = 80.0


@dataclass
class Extrinsics:
    rotation: np.ndarray     # (3, 3) sensor -> camera
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise DimensionMismatchError("extrinsics are a 3x3 R and 3-vector t")
        if not np.allclose(self.rotation.T @ self.rotation, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal")
        if not np.isclose(np.linalg.det(self.rotation), 1.0, atol=1e-9):
            raise ValueError("rotation must be proper (det 1)")

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points):
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def inverse_apply(self, points):
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation


@dataclass
class LidarScan:
    points: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        keep = np.linalg.norm(points, axis=1) <= LIDAR_MAX_RANGE
        self.points = points[keep]


def project_lidar(points, extrinsics, K, width, height):
    """Project sensor points to (u, v, ray depth) rows.

    Points behind the camera or landing outside the frame are dropped.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = extrinsics.apply(points)
    front = cam[:, 2] > 0
    cam = cam[front]
    u = K.fu * cam[:, 0] / cam[:, 2] + K.u0
    v = K.fv * cam[:, 1] / cam[:, 2] + K.v0
    depth = np.linalg.norm(cam, axis=1)
    keep = (
        (np.rint(u) >= 0)
        & (np.rint(u) <= width - 1)
        & (np.rint(v) >= 0)
        & (np.rint(v) <= height - 1)
    )
    return np.stack([u[keep], v[keep], depth[keep]], axis=1)


def segment_ground_truth(projections, labels, window=5):
    """Per-frame DepthMaps from laser hits averaged per region over a
    centered window of frames; regions without hits are invalid."""
    labels = np.asarray(labels)
    if labels.ndim != 3:
        raise DimensionMismatchError("label maps are (frames, h, w)")
    n_frames, h, w = labels.shape
    if len(projections) != n_frames:
        raise DimensionMismatchError("one projection list per frame required")
    n_regions = int(labels.max()) + 1
    # per frame: depth sum and hit count per region
    sums = np.zeros((n_frames, n_regions))
    counts = np.zeros((n_frames, n_regions))
    for t, proj in enumerate(projections):
        proj = np.asarray(proj, dtype=np.float64).reshape(-1, 3)
        if proj.size == 0:
            continue
        us = np.rint(proj[:, 0]).astype(np.int64)
        vs = np.rint(proj[:, 1]).astype(np.int64)
        inside = (us >= 0) & (us < w) & (vs >= 0) & (vs < h)
        regions = labels[t, vs[inside], us[inside]]
        np.add.at(sums[t], regions, proj[inside, 2])
        np.add.at(counts[t], regions, 1.0)
    lo_off = window // 2
    hi_off = window - lo_off - 1
    maps = []
    for t in range(n_frames):
        a = max(0, t - lo_off)
        b = min(n_frames, t + hi_off + 1)
        s = sums[a:b].sum(axis=0)
        c = counts[a:b].sum(axis=0)
        region_depth = np.divide(s, c, out=np.zeros_like(s), where=c > 0)
        values = region_depth[labels[t]]
        valid = (c > 0)[labels[t]]
        maps.append(DepthMap(values, valid))
    return maps


def depth_map_to_points(dm, K, extrinsics=None, n_points=4000, rng=None):
    """Sample a depth map back into a sensor-coordinate point cloud
    (inverse of project_lidar over valid pixels)."""
    from .geometry import ray_grid

    rng = rng or np.random.default_rng(0)
    ys, xs = np.nonzero(dm.valid)
    if ys.size == 0:
        return np.zeros((0, 3))
    take = min(n_points, ys.size)
    pick = rng.choice(ys.size, size=take, replace=False)
    rays = ray_grid(K, dm.width, dm.height)[ys[pick], xs[pick]]
    cam = rays * dm.values[ys[pick], xs[pick]][:, None]
    if extrinsics is None:
        return cam
    return extrinsics.inverse_apply(cam)
