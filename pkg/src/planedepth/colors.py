"""Vectorized RGB<->HSV conversion and the depth preview colormap."""

import numpy as np


def rgb_to_hsv(rgb):
    """RGB in [0, 1] (any leading shape, last axis 3) -> HSV in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    # hue: piecewise by which channel is max; gray pixels get hue 0
    h = np.zeros_like(maxc)
    mask = delta > 0
    safe = np.where(mask, delta, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(mask & (maxc == r), bc - gc, h)
    h = np.where(mask & (maxc == g) & (maxc != r), 2.0 + rc - bc, h)
    h = np.where(mask & (maxc == b) & (maxc != r) & (maxc != g), 4.0 + gc - rc, h)
    h = (h / 6.0) % 1.0
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv):
    """HSV in [0, 1] -> RGB in [0, 1]."""
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    choices_r = np.stack([v, q, p, p, t, v], axis=-1)
    choices_g = np.stack([t, v, v, q, p, p], axis=-1)
    choices_b = np.stack([p, p, t, v, v, q], axis=-1)
    idx = np.expand_dims(i, -1)
    r = np.take_along_axis(choices_r, idx, axis=-1)[..., 0]
    g = np.take_along_axis(choices_g, idx, axis=-1)[..., 0]
    b = np.take_along_axis(choices_b, idx, axis=-1)[..., 0]
    return np.stack([r, g, b], axis=-1)


def depth_preview(values, valid=None, d_max=80.0):
    """Color-map depth to uint8 RGB, 0 m (blue) to d_max (red).

    Invalid pixels render black.
    """
    values = np.asarray(values, dtype=np.float64)
    t = np.clip(values / d_max, 0.0, 1.0)
    # 0 m -> blue (hue 2/3), d_max -> red (hue 0)
    hue = (1.0 - t) * (2.0 / 3.0)
    hsv = np.stack([hue, np.ones_like(hue), np.ones_like(hue)], axis=-1)
    rgb = (hsv_to_rgb(hsv) * 255.0).round().astype(np.uint8)
    if valid is not None:
        rgb[~np.asarray(valid, dtype=bool)] = 0
    return rgb
