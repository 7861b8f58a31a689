"""Pinhole camera model, viewing rays, plane parameters, and depth rendering.

Conventions used throughout the package:

* A viewing ray is a unit-norm 3-vector ``r`` with positive z for in-frustum
  pixels.  Depth is measured *along the ray* (Euclidean distance from the
  camera center), which matches laser range measurements.
* A plane is a 3-vector ``alpha`` (units 1/m) such that a pixel with ray
  ``r`` lying on the plane has depth ``1 / (r . alpha)``.
* Depths are clamped to ``D_MAX`` (80 m); clamped pixels stay valid, which
  is the sky/far convention shared with the sensor range of ground truth.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    DimensionMismatchError,
    EmptyInputError,
    MissingPlaneError,
)

D_MAX = 80.0


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal lengths and principal point, in pixels."""

    fu: float
    fv: float
    u0: float
    v0: float

    def __post_init__(self):
        if not (self.fu > 0 and self.fv > 0):
            raise ValueError("focal lengths must be positive")
        if not np.all(np.isfinite([self.fu, self.fv, self.u0, self.v0])):
            raise ValueError("intrinsics must be finite")

    def matrix(self):
        return np.array(
            [[self.fu, 0.0, self.u0], [0.0, self.fv, self.v0], [0.0, 0.0, 1.0]]
        )

    @classmethod
    def default(cls, width, height):
        """Fallback when a video ships without calibration: focal length
        max(width, height), principal point at the image center."""
        f = float(max(width, height))
        return cls(f, f, (width - 1) / 2.0, (height - 1) / 2.0)


def pixel_ray(K, u, v):
    """Unit viewing ray through pixel (u, v).

    Rotation is fixed to identity, so the ray is the normalized
    K^-1 [u, v, 1]^T.  Broadcasts over array-valued u, v; the last result
    axis holds (x, y, z).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = (u - K.u0) / K.fu
    y = (v - K.v0) / K.fv
    r = np.stack(np.broadcast_arrays(x, y, np.ones_like(x + y)), axis=-1)
    r /= np.linalg.norm(r, axis=-1, keepdims=True)
    return r


def ray_grid(K, width, height):
    """(height, width, 3) unit rays for every pixel center."""
    u = np.arange(width, dtype=np.float64)[None, :]
    v = np.arange(height, dtype=np.float64)[:, None]
    return pixel_ray(K, u, v)


def plane_depth(ray, alpha):
    """Depth along ``ray`` of the plane ``alpha``: 1 / (r . alpha).

    Raises BehindCameraError if any r . alpha is non-positive.
    """
    ray = np.asarray(ray, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    dot = ray @ alpha
    if np.any(dot <= 0):
        raise BehindCameraError("plane lies behind the camera along this ray")
    return 1.0 / dot


def fit_plane(rays, depths):
    """Least-squares plane through (ray, depth) samples.

    Minimizes sum((r . alpha - 1/d)^2); exact when the samples lie on one
    plane.  Requires >= 3 rays spanning rank 3.
    """
    rays = np.asarray(rays, dtype=np.float64)
    depths = np.asarray(depths, dtype=np.float64)
    if rays.ndim != 2 or rays.shape[1] != 3:
        raise DimensionMismatchError("rays must be (n, 3)")
    if rays.shape[0] != depths.shape[0]:
        raise DimensionMismatchError("one depth per ray required")
    if rays.shape[0] < 3:
        raise DegenerateGeometryError("need at least 3 rays to fit a plane")
    if np.any(depths <= 0):
        raise ValueError("depths must be positive")
    alpha, _, rank, _ = np.linalg.lstsq(rays, 1.0 / depths, rcond=None)
    if rank < 3:
        raise DegenerateGeometryError("rays do not span 3 directions")
    return alpha


class DepthMap:
    """Per-pixel metric depth (meters, ray distance) plus a validity mask."""

    __slots__ = ("values", "valid")

    def __init__(self, values, valid=None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionMismatchError("depth values must be 2-D")
        if valid is None:
            valid = np.ones(values.shape, dtype=bool)
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != values.shape:
                raise DimensionMismatchError("mask shape must match values")
        self.values = values
        self.valid = valid

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def copy(self):
        return DepthMap(self.values.copy(), self.valid.copy())

    def __eq__(self, other):
        return (
            isinstance(other, DepthMap)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.valid, other.valid)
        )


def render_depth(labels_frame, planes, K, d_max=D_MAX):
    """Render per-pixel depth for one frame from per-region planes.

    ``planes`` maps region id -> alpha (a dict, or an array indexed by id).
    Pixels where r . alpha <= 0 or depth exceeds ``d_max`` clamp to d_max
    and stay valid (sky/far convention).
    """
    labels_frame = np.asarray(labels_frame)
    ids = np.unique(labels_frame)
    if isinstance(planes, dict):
        missing = [int(i) for i in ids if int(i) not in planes]
        if missing:
            raise MissingPlaneError(f"no plane for regions {missing}")
        table = np.zeros((int(ids.max()) + 1, 3))
        for i in ids:
            table[int(i)] = np.asarray(planes[int(i)], dtype=np.float64)
    else:
        table = np.asarray(planes, dtype=np.float64)
        if ids.max() >= table.shape[0]:
            raise MissingPlaneError(
                f"label {int(ids.max())} outside plane table of {table.shape[0]}"
            )
    h, w = labels_frame.shape
    rays = ray_grid(K, w, h)
    dot = np.einsum("hwc,hwc->hw", rays, table[labels_frame])
    values = np.full((h, w), d_max)
    front = dot > 0
    values[front] = np.minimum(1.0 / dot[front], d_max)
    return DepthMap(values)


def region_centroid_pixel(ys, xs):
    """Region pixel nearest the centroid (the 'center pixel' used by the
    co-planarity term).  Deterministic for ties (lowest y, then x wins)."""
    if len(ys) == 0:
        raise EmptyInputError("empty region")
    cy = ys.mean()
    cx = xs.mean()
    d2 = (ys - cy) ** 2 + (xs - cx) ** 2
    k = int(np.lexsort((xs, ys, d2))[0])
    return int(ys[k]), int(xs[k])
