"""Dense optical flow: coarse-to-fine Horn-Schunck plus multi-frame chaining.

Flow fields are (h, w, 2) float arrays, last axis (du, dv) in pixels,
displacement from the first frame toward the second.  Frames are RGB or
grayscale arrays; estimation runs on 0..255 grayscale.

Wider temporal baselines (offsets 3 and 5 of the motion features) are
obtained by composing consecutive fields with bilinear resampling rather
than re-estimating, which is adequate for the histogram features that
consume them.
"""

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError

# Horn-Schunck weighted neighborhood average
_AVG_KERNEL = np.array(
    [[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]]
)


def _to_gray(frame):
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 3:
        return frame @ np.array([0.299, 0.587, 0.114])
    return frame


def _bilinear_sample(img, ys, xs):
    """Sample img at float coordinates, clamping to the border."""
    h, w = img.shape[:2]
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def warp_backward(img, flow):
    """Sample img at p + flow(p) for every pixel p."""
    h, w = img.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return _bilinear_sample(img, ys + flow[..., 1], xs + flow[..., 0])


def _downsample(img):
    """Halve each dimension by 2x2 box averaging (odd trailing row/col folded in)."""
    return ndimage.zoom(img, 0.5, order=1, mode="nearest", grid_mode=True)


def _hs_iterations(a, b, u, v, smoothness, iterations):
    """Classic Horn-Schunck update on a pre-warped pair, refining (u, v)."""
    ax = ndimage.correlate(a, np.array([[-1, 0, 1]]) / 2.0, mode="nearest")
    bx = ndimage.correlate(b, np.array([[-1, 0, 1]]) / 2.0, mode="nearest")
    ay = ndimage.correlate(a, np.array([[-1], [0], [1]]) / 2.0, mode="nearest")
    by = ndimage.correlate(b, np.array([[-1], [0], [1]]) / 2.0, mode="nearest")
    fx = 0.5 * (ax + bx)
    fy = 0.5 * (ay + by)
    ft = b - a
    denom = smoothness**2 + fx**2 + fy**2
    du = np.zeros_like(u)
    dv = np.zeros_like(v)
    for _ in range(iterations):
        du_avg = ndimage.correlate(du, _AVG_KERNEL, mode="nearest")
        dv_avg = ndimage.correlate(dv, _AVG_KERNEL, mode="nearest")
        shared = (fx * du_avg + fy * dv_avg + ft) / denom
        du = du_avg - fx * shared
        dv = dv_avg - fy * shared
    return u + du, v + dv


def dense_flow(a, b, pyramid_levels=3, iterations=100, smoothness=15.0):
    """Estimate displacement from frame a to frame b.

    Identical frames yield an exactly zero field: with zero initial flow the
    temporal derivative vanishes and every update is a fixed point.
    """
    a = _to_gray(a)
    b = _to_gray(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"frame shapes differ: {a.shape} vs {b.shape}"
        )
    pyr_a = [a]
    pyr_b = [b]
    for _ in range(pyramid_levels - 1):
        if min(pyr_a[-1].shape) < 16:
            break
        pyr_a.append(_downsample(pyr_a[-1]))
        pyr_b.append(_downsample(pyr_b[-1]))
    u = np.zeros_like(pyr_a[-1])
    v = np.zeros_like(pyr_a[-1])
    for level in range(len(pyr_a) - 1, -1, -1):
        la, lb = pyr_a[level], pyr_b[level]
        if u.shape != la.shape:
            scale_y = la.shape[0] / u.shape[0]
            scale_x = la.shape[1] / u.shape[1]
            u = ndimage.zoom(u, (scale_y, scale_x), order=1, mode="nearest") * scale_x
            v = ndimage.zoom(v, (scale_y, scale_x), order=1, mode="nearest") * scale_y
        flow = np.stack([u, v], axis=-1)
        warped = warp_backward(lb, flow)
        u, v = _hs_iterations(la, warped, u, v, smoothness, iterations)
    return np.stack([u, v], axis=-1)


def compose_flow(first, second):
    """Chain two fields: result(p) = first(p) + second(p + first(p))."""
    h, w = first.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    tail = _bilinear_sample(second, ys + first[..., 1], xs + first[..., 0])
    return first + tail


def flow_to(frames, j, offset, cache=None, **params):
    """Flow from frame j back to frame j - offset (offsets 1, 3, 5 ...).

    Returns (field, padded).  When j - offset < 0 the field is zero and
    padded is True; feature extraction zeroes the corresponding block.
    Consecutive backward fields are estimated once (memoized in ``cache``,
    a dict keyed by source frame index) and composed for larger offsets.
    """
    h, w = frames[0].shape[:2]
    if j - offset < 0:
        return np.zeros((h, w, 2)), True
    if cache is None:
        cache = {}

    def backward(t):
        if t not in cache:
            cache[t] = dense_flow(frames[t], frames[t - 1], **params)
        return cache[t]

    field = backward(j)
    for step in range(1, offset):
        field = compose_flow(field, backward(j - step))
    return field, False
