"""Per-region feature extraction: the fixed 133-value vector.

Block layout (offsets are stable; ablations select blocks by name):

    color     [0:6)     mean R, G, B (0..1) and mean H, S, V
    texture   [6:21)    mean |response| of the 15-filter bank
    location  [21:23)   mean y / height, (mean y - horizon) / height
    motion    [23:128)  35 values per temporal offset (1, 3, 5):
                          8   orientation histogram (magnitude-weighted, L1)
                          3   mean du, mean dv, mean |flow|
                          24  per Sobel size 3/5/7: 4-bin |d flow/dx| and
                              4-bin |d flow/dy| count histograms (L1)
    geom      [128:133) mean confidence per class (sky, ground, solid,
                        porous, movable)

Histogram blocks sum to 1 or are all zero (zero total magnitude, or a
padded flow offset that reaches before the start of the video); the
derivative bin edges are {0, 0.1, 0.5, 2, inf} px.

The texture bank is a reduced oriented-filter set: 8 odd-symmetric Gaussian
derivatives (4 orientations x 2 scales), 4 center-surround Laplacians, and
3 even-symmetric bars.  All kernels are zero-mean, so uniform regions score
(near) zero everywhere.
"""

from functools import lru_cache

import numpy as np
from scipy import ndimage

from .colors import rgb_to_hsv
from .errors import DimensionMismatchError, EmptyInputError

GC_CLASSES = ("sky", "ground", "solid", "porous", "movable")
MOTION_OFFSETS = (1, 3, 5)
DERIV_BIN_EDGES = np.array([0.0, 0.1, 0.5, 2.0, np.inf])

FEATURE_BLOCKS = {
    "color": slice(0, 6),
    "texture": slice(6, 21),
    "location": slice(21, 23),
    "motion": slice(23, 128),
    "geom": slice(128, 133),
}
FEATURE_LENGTH = 133
MOTION_VALUES_PER_OFFSET = 35

ABLATIONS = {
    "Appearance": ("color", "texture", "location"),
    "App+Flow": ("color", "texture", "location", "motion"),
    "ALL": ("color", "texture", "location", "motion", "geom"),
}


def feature_names():
    """Block-dotted column names, aligned with the 133-value layout."""
    names = [f"color.{c}" for c in ("r", "g", "b", "h", "s", "v")]
    names += [f"texture.{i}" for i in range(15)]
    names += ["location.y", "location.horizon"]
    for off in MOTION_OFFSETS:
        names += [f"motion.off{off}.orient{i}" for i in range(8)]
        names += [f"motion.off{off}.{m}" for m in ("mean_du", "mean_dv", "mean_mag")]
        for size in (3, 5, 7):
            names += [f"motion.off{off}.sobel{size}.dx{i}" for i in range(4)]
            names += [f"motion.off{off}.sobel{size}.dy{i}" for i in range(4)]
    names += [f"geom.{c}" for c in GC_CLASSES]
    assert len(names) == FEATURE_LENGTH
    return names


def ablation_columns(ablation):
    """Column indices kept by an ablation ('Appearance', 'App+Flow', 'ALL')."""
    if ablation not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablation!r}")
    cols = []
    for block in ABLATIONS[ablation]:
        sl = FEATURE_BLOCKS[block]
        cols.extend(range(sl.start, sl.stop))
    return np.asarray(cols, dtype=np.int64)


# ---------------------------------------------------------------------------
# texture filter bank

def _oriented_grid(radius, theta):
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    xs, ys = np.meshgrid(ax, ax)
    c, s = np.cos(theta), np.sin(theta)
    return xs * c + ys * s, -xs * s + ys * c


def _normalize_kernel(k):
    k = k - k.mean()  # exact zero response on constant input
    norm = np.abs(k).sum()
    return k / norm if norm > 0 else k


@lru_cache(maxsize=1)
def texture_filter_bank():
    """15 zero-mean kernels: 8 oriented odd, 4 center-surround, 3 bars."""
    bank = []
    for sigma in (1.0, 2.0):
        radius = int(np.ceil(3 * sigma))
        for theta in (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4):
            u, v = _oriented_grid(radius, theta)
            g = np.exp(-(u**2 + (v / 3.0) ** 2) / (2 * sigma**2))
            bank.append(_normalize_kernel(-u / sigma**2 * g))
    for sigma in (1.0, 1.5, 2.0, 3.0):
        radius = int(np.ceil(3 * sigma))
        ax = np.arange(-radius, radius + 1, dtype=np.float64)
        xs, ys = np.meshgrid(ax, ax)
        r2 = xs**2 + ys**2
        log = (r2 - 2 * sigma**2) / sigma**4 * np.exp(-r2 / (2 * sigma**2))
        bank.append(_normalize_kernel(log))
    for theta in (0.0, np.pi / 3, 2 * np.pi / 3):
        sigma = 1.5
        radius = int(np.ceil(3 * sigma))
        u, v = _oriented_grid(radius, theta)
        g = np.exp(-(u**2 + (v / 3.0) ** 2) / (2 * sigma**2))
        bank.append(_normalize_kernel((u**2 / sigma**4 - 1 / sigma**2) * g))
    assert len(bank) == 15
    return bank


def texture_responses(frame):
    """(h, w, 15) filter responses of the grayscale frame (0..1 scale)."""
    gray = np.asarray(frame, dtype=np.float64)
    if gray.ndim == 3:
        gray = gray @ np.array([0.299, 0.587, 0.114])
    if gray.max() > 1.5:
        gray = gray / 255.0
    return np.stack(
        [ndimage.convolve(gray, k, mode="reflect") for k in texture_filter_bank()],
        axis=-1,
    )


# ---------------------------------------------------------------------------
# feature blocks

def _check_region(ys, xs):
    ys = np.asarray(ys, dtype=np.int64)
    xs = np.asarray(xs, dtype=np.int64)
    if ys.size == 0:
        raise EmptyInputError("empty region")
    if ys.shape != xs.shape:
        raise DimensionMismatchError("ys and xs must pair up")
    return ys, xs


def color_features(frame, ys, xs):
    """Mean RGB (scaled to 0..1) and mean HSV over the region."""
    ys, xs = _check_region(ys, xs)
    rgb = np.asarray(frame, dtype=np.float64)[ys, xs] / 255.0
    hsv = rgb_to_hsv(rgb)
    return np.concatenate([rgb.mean(axis=0), hsv.mean(axis=0)])


def texture_features(frame, ys, xs, responses=None):
    """Mean absolute filter response per bank kernel.

    Pass precomputed ``responses`` (from texture_responses) when extracting
    many regions of one frame.
    """
    ys, xs = _check_region(ys, xs)
    if responses is None:
        responses = texture_responses(frame)
    return np.abs(responses[ys, xs]).mean(axis=0)


def location_features(ys, height, horizon_row):
    ys = np.asarray(ys, dtype=np.float64)
    if ys.size == 0:
        raise EmptyInputError("empty region")
    mean_y = ys.mean()
    return np.array([mean_y / height, (mean_y - horizon_row) / height])


class MotionMaps:
    """Precomputed per-frame maps consumed by the motion block: flow
    magnitude/orientation plus Sobel derivative magnitudes at 3 scales."""

    def __init__(self, field):
        field = np.asarray(field, dtype=np.float64)
        self.field = field
        du, dv = field[..., 0], field[..., 1]
        self.magnitude = np.hypot(du, dv)
        self.angle_bin = (
            np.floor(((np.arctan2(dv, du) + np.pi / 8) % (2 * np.pi)) / (np.pi / 4))
            .astype(np.int64)
            % 8
        )
        self.deriv = {}
        for size in (3, 5, 7):
            kx, ky = _sobel_pair(size)
            ddx = np.stack(
                [ndimage.convolve(du, kx, mode="nearest"),
                 ndimage.convolve(dv, kx, mode="nearest")], axis=-1)
            ddy = np.stack(
                [ndimage.convolve(du, ky, mode="nearest"),
                 ndimage.convolve(dv, ky, mode="nearest")], axis=-1)
            self.deriv[size] = (
                np.linalg.norm(ddx, axis=-1),
                np.linalg.norm(ddy, axis=-1),
            )


@lru_cache(maxsize=8)
def _sobel_pair(size):
    """x/y derivative kernels of the given size, normalized to unit ramp
    gain so responses read as px/px."""
    smooth = np.array([1.0])
    for _ in range(size - 1):
        smooth = np.convolve(smooth, [1.0, 1.0])
    deriv = np.array([-1.0, 0.0, 1.0])
    for _ in range((size - 3) // 2):
        deriv = np.convolve(deriv, [1.0, 2.0, 1.0])
    kx = np.outer(smooth, deriv)
    kx = kx / np.sum(kx * np.arange(-(size // 2), size // 2 + 1)[None, :])
    return kx, kx.T.copy()


def _count_hist(values, edges):
    hist, _ = np.histogram(values, bins=edges)
    total = hist.sum()
    return hist / total if total > 0 else hist.astype(np.float64)


def motion_features(flow_entries, ys, xs):
    """Motion block: 35 values for each of the offsets 1, 3, 5.

    ``flow_entries`` is a list of (field_or_MotionMaps, padded) pairs in
    offset order; padded entries contribute an all-zero sub-block.
    """
    ys, xs = _check_region(ys, xs)
    out = []
    for entry, padded in flow_entries:
        if padded:
            out.append(np.zeros(MOTION_VALUES_PER_OFFSET))
            continue
        maps = entry if isinstance(entry, MotionMaps) else MotionMaps(entry)
        mag = maps.magnitude[ys, xs]
        bins = maps.angle_bin[ys, xs]
        orient = np.bincount(bins, weights=mag, minlength=8)
        total = orient.sum()
        if total > 0:
            orient = orient / total
        du = maps.field[ys, xs, 0]
        dv = maps.field[ys, xs, 1]
        parts = [orient, [du.mean(), dv.mean(), mag.mean()]]
        for size in (3, 5, 7):
            dxm, dym = maps.deriv[size]
            parts.append(_count_hist(dxm[ys, xs], DERIV_BIN_EDGES))
            parts.append(_count_hist(dym[ys, xs], DERIV_BIN_EDGES))
        out.append(np.concatenate([np.asarray(p, dtype=np.float64) for p in parts]))
    if len(out) != len(MOTION_OFFSETS):
        raise DimensionMismatchError(
            f"expected {len(MOTION_OFFSETS)} flow entries, got {len(out)}"
        )
    return np.concatenate(out)


def geometric_features(gc_map, ys, xs):
    """Mean per-class confidence over the region."""
    ys, xs = _check_region(ys, xs)
    gc_map = np.asarray(gc_map, dtype=np.float64)
    if gc_map.ndim != 3 or gc_map.shape[2] != len(GC_CLASSES):
        raise DimensionMismatchError("confidence map must be (h, w, 5)")
    if ys.max() >= gc_map.shape[0] or xs.max() >= gc_map.shape[1]:
        raise DimensionMismatchError("region pixels outside the confidence map")
    return gc_map[ys, xs].mean(axis=0)


def assemble_features(color, texture, location, motion, geom):
    """Fixed-order concatenation into the 133-value vector."""
    blocks = {"color": color, "texture": texture, "location": location,
              "motion": motion, "geom": geom}
    parts = []
    for name, sl in FEATURE_BLOCKS.items():
        block = blocks[name]
        if block is None:
            raise ValueError(f"missing feature block {name!r}")
        block = np.asarray(block, dtype=np.float64)
        want = sl.stop - sl.start
        if block.shape != (want,):
            raise DimensionMismatchError(
                f"block {name!r} must have {want} values, got {block.shape}"
            )
        parts.append(block)
    out = np.concatenate(parts)
    if not np.all(np.isfinite(out)):
        raise ValueError("feature vector contains non-finite values")
    return out


# ---------------------------------------------------------------------------
# geometric-context providers

def gc_training_rows(video, rindex, horizon_row):
    """Appearance features (color+texture+location, 23 values) for every
    region slice; rows align with the (region, frame) keys returned."""
    rows, keys = [], []
    for t in range(rindex.n_frames):
        responses = texture_responses(video[t])
        for r in range(rindex.n_regions):
            ys, xs = rindex.pixels(r, t)
            if ys.size == 0:
                continue
            rows.append(np.concatenate([
                color_features(video[t], ys, xs),
                texture_features(video[t], ys, xs, responses),
                location_features(ys, video.shape[1], horizon_row),
            ]))
            keys.append((r, t))
    return np.asarray(rows), keys


def train_geometric_context(rows, class_labels, params=None):
    """Train the baseline per-region classifier over the 5 layout classes."""
    from . import forest

    params = params or forest.ForestParams(
        n_trees=40, n_features_per_node=5, max_depth=20, min_samples_leaf=3
    )
    return forest.train(
        np.asarray(rows), np.asarray(class_labels, dtype=np.int64),
        params, task="classification", compute_importance=False,
    )


def baseline_geometric_context(video, rindex, model, horizon_row):
    """Per-frame (h, w, 5) confidence maps from the baseline classifier,
    broadcast from region predictions to pixels."""
    from . import forest

    video = np.asarray(video)
    rows, keys = gc_training_rows(video, rindex, horizon_row)
    probs = forest.predict(model, rows)
    if probs.shape[1] < len(GC_CLASSES):  # classifier saw fewer classes
        pad = np.zeros((probs.shape[0], len(GC_CLASSES) - probs.shape[1]))
        probs = np.hstack([probs, pad])
    maps = np.zeros(video.shape[:3] + (len(GC_CLASSES),))
    for (r, t), p in zip(keys, probs):
        ys, xs = rindex.pixels(r, t)
        maps[t, ys, xs] = p
    return maps
