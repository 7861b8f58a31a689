"""Spatio-temporal video segmentation by adaptive-threshold agglomeration.

A video volume is segmented into regions coherent in appearance and motion:
pixels are graph nodes, spatial 8-neighbors are linked with RGB-distance
weights, and each pixel links to its flow-displaced pixel in the next frame
so regions persist across time.  Merging follows the adaptive-threshold
criterion with parameter ``merge_threshold`` (larger values merge more),
with undersized components folded into their cheapest neighbor.

Label maps are (frames, h, w) int32 arrays with contiguous region ids; a
region keeps one id for its whole temporal extent.
"""

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError, EmptyInputError


def _color_volume(video):
    video = np.asarray(video)
    if video.size == 0:
        raise EmptyInputError("cannot segment an empty video")
    if video.ndim == 3:  # grayscale: replicate to 3 channels
        video = np.repeat(video[..., None], 3, axis=3)
    if video.ndim != 4 or video.shape[3] != 3:
        raise DimensionMismatchError("video must be (frames, h, w, 3) or (frames, h, w)")
    return video.astype(np.float64)


def _spatial_edges(frame_colors, base):
    """8-neighborhood edges inside one frame; nodes offset by ``base``."""
    h, w = frame_colors.shape[:2]
    idx = base + np.arange(h * w, dtype=np.int64).reshape(h, w)
    pairs = []
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        ys = slice(0, h - dy)
        xs = slice(max(0, -dx), w - max(0, dx))
        ys2 = slice(dy, h)
        xs2 = slice(max(0, dx), w + min(0, dx))
        a = idx[ys, xs].ravel()
        b = idx[ys2, xs2].ravel()
        diff = frame_colors[ys, xs] - frame_colors[ys2, xs2]
        wgt = np.sqrt((diff * diff).sum(axis=-1)).ravel()
        pairs.append((a, b, wgt))
    return pairs


def _temporal_edges(colors, flows, t, h, w):
    """Edges from frame t pixels to their flow-displaced pixels in t + 1."""
    n = h * w
    ys, xs = np.mgrid[0:h, 0:w]
    if flows is not None and len(flows) > t and flows[t] is not None:
        du = flows[t][..., 0]
        dv = flows[t][..., 1]
    else:
        du = np.zeros((h, w))
        dv = np.zeros((h, w))
    ty = np.clip(np.rint(ys + dv), 0, h - 1).astype(np.int64)
    tx = np.clip(np.rint(xs + du), 0, w - 1).astype(np.int64)
    a = (t * n + ys * w + xs).ravel()
    b = ((t + 1) * n + ty * w + tx).ravel()
    diff = colors[t][ys, xs] - colors[t + 1][ty, tx]
    color_w = np.sqrt((diff * diff).sum(axis=-1))
    mag_here = np.sqrt(du * du + dv * dv)
    if flows is not None and len(flows) > t + 1 and flows[t + 1] is not None:
        nxt = flows[t + 1]
        mag_next = np.sqrt(nxt[..., 0] ** 2 + nxt[..., 1] ** 2)[ty, tx]
    else:
        mag_next = mag_here  # no field for the next frame: no motion evidence
    # appearance and motion coherence averaged, per the edge-weight contract
    wgt = 0.5 * color_w + 0.5 * np.abs(mag_here - mag_next)
    jumped = bool(np.any(np.abs(np.rint(du)) > 1) or np.any(np.abs(np.rint(dv)) > 1))
    return (a.ravel(), b.ravel(), wgt.ravel()), jumped


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def segment_video(video, flows=None, merge_threshold=300.0,
                  min_region_size=64, smoothing_sigma=0.0):
    """Segment a video volume into spatio-temporal regions.

    flows: per consecutive pair, the forward field from frame t to t + 1
    (may be None or empty; temporal links then go straight down the time
    axis).  Color distances are measured on the 0..255 scale, optionally
    after Gaussian smoothing for noisy footage.  min_region_size is
    enforced per frame-slice by scaling with each component's temporal
    extent.  Deterministic: edges are processed in (weight, node a, node b)
    order.
    """
    video = _color_volume(video)
    t_count, h, w = video.shape[:3]
    if t_count == 0 or h == 0 or w == 0:
        raise EmptyInputError("cannot segment an empty video")
    if flows:
        for f in flows:
            if f.shape[:2] != (h, w):
                raise DimensionMismatchError("flow field size != frame size")
    colors = np.stack(
        [ndimage.gaussian_filter(video[t], (smoothing_sigma, smoothing_sigma, 0))
         for t in range(t_count)]
    ) if smoothing_sigma > 0 else video

    n_per_frame = h * w
    n = t_count * n_per_frame
    ea, eb, ew = [], [], []
    jumped = False
    for t in range(t_count):
        for a, b, wgt in _spatial_edges(colors[t], t * n_per_frame):
            ea.append(a)
            eb.append(b)
            ew.append(wgt)
        if t + 1 < t_count:
            (a, b, wgt), j = _temporal_edges(colors, flows, t, h, w)
            jumped = jumped or j
            ea.append(a)
            eb.append(b)
            ew.append(wgt)
    ea = np.concatenate(ea)
    eb = np.concatenate(eb)
    ew = np.concatenate(ew)
    order = np.lexsort((eb, ea, ew))
    ea_s = ea[order].tolist()
    eb_s = eb[order].tolist()
    ew_s = ew[order].tolist()

    k = float(merge_threshold)
    parent = list(range(n))
    size = [1] * n
    thresh = [k] * n
    fmin = [i // n_per_frame for i in range(n)]
    fmax = fmin.copy()

    def union(ra, rb):
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
        fmin[ra] = min(fmin[ra], fmin[rb])
        fmax[ra] = max(fmax[ra], fmax[rb])
        return ra

    for a, b, wt in zip(ea_s, eb_s, ew_s):
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        if wt <= thresh[ra] and wt <= thresh[rb]:
            r = union(ra, rb)
            thresh[r] = wt + k / size[r]

    # fold undersized components into their cheapest neighbor
    for a, b, _ in zip(ea_s, eb_s, ew_s):
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        lim_a = min_region_size * (fmax[ra] - fmin[ra] + 1)
        lim_b = min_region_size * (fmax[rb] - fmin[rb] + 1)
        if size[ra] < lim_a or size[rb] < lim_b:
            union(ra, rb)

    roots = np.fromiter((_find(parent, i) for i in range(n)), dtype=np.int64, count=n)
    _, labels = np.unique(roots, return_inverse=True)
    labels = _compact_by_first_occurrence(labels)
    labels = labels.reshape(t_count, h, w).astype(np.int32)
    if jumped:
        labels = _enforce_connectivity(labels, colors, min_region_size)
    return labels


def _compact_by_first_occurrence(labels_flat):
    """Renumber so region ids appear in raster order of first pixel."""
    _, first_idx, inverse = np.unique(
        labels_flat, return_index=True, return_inverse=True
    )
    rank = np.empty(first_idx.size, dtype=np.int64)
    rank[np.argsort(first_idx)] = np.arange(first_idx.size)
    return rank[inverse]


def _enforce_connectivity(labels, colors, min_region_size):
    """Split regions that are not 26-connected, then fold splinters smaller
    than the per-slice minimum into their most similar spatial neighbor."""
    t_count, h, w = labels.shape
    structure = np.ones((3, 3, 3), dtype=bool)
    out = np.full(labels.shape, -1, dtype=np.int32)
    next_id = 0
    for region in range(int(labels.max()) + 1):
        mask = labels == region
        if not mask.any():
            continue
        comp, n_comp = ndimage.label(mask, structure=structure)
        for c in range(1, n_comp + 1):
            out[comp == c] = next_id
            next_id += 1
    # fold splinters
    idx = build_region_index(out)
    mean_color = np.zeros((idx.n_regions, 3))
    for r in range(idx.n_regions):
        total = np.zeros(3)
        for t in idx.frames_of(r):
            ys, xs = idx.pixels(r, t)
            total += colors[t][ys, xs].sum(axis=0)
        mean_color[r] = total / idx.counts[r]
    extent = np.array(
        [idx.bbox(r)[1] - idx.bbox(r)[0] + 1 for r in range(idx.n_regions)]
    )
    small = np.where(idx.counts < min_region_size * extent)[0]
    merge_into = {}
    for r in small:
        neighbors = sorted(
            j for (i, j) in idx.adjacency if i == r
        ) + sorted(i for (i, j) in idx.adjacency if j == r)
        if not neighbors:
            continue
        dists = [(np.linalg.norm(mean_color[r] - mean_color[nb]), nb) for nb in neighbors]
        merge_into[r] = min(dists)[1]
    if merge_into:
        remap = np.arange(idx.n_regions, dtype=np.int32)
        for r, target in merge_into.items():
            final = target
            seen = {r}
            while final in merge_into and final not in seen:
                seen.add(final)
                final = merge_into[final]
            remap[r] = final
        out = remap[out]
    flat = _compact_by_first_occurrence(out.ravel().astype(np.int64))
    return flat.reshape(t_count, h, w).astype(np.int32)


class RegionIndex:
    """Pixel lists, counts, bounding boxes, and adjacency for a label map."""

    def __init__(self, labels):
        labels = np.asarray(labels)
        if labels.ndim != 3:
            raise DimensionMismatchError("label maps are (frames, h, w)")
        self.labels = labels
        self.n_frames, self.height, self.width = labels.shape
        self.n_regions = int(labels.max()) + 1
        self.counts = np.bincount(labels.ravel(), minlength=self.n_regions)
        self._pixels = []  # per frame: dict region -> flat pixel indices
        for t in range(self.n_frames):
            frame = labels[t].ravel()
            order = np.argsort(frame, kind="stable")
            counts = np.bincount(frame, minlength=self.n_regions)
            splits = np.cumsum(counts)[:-1]
            chunks = np.split(order, splits)
            self._pixels.append(
                {r: chunk for r, chunk in enumerate(chunks) if chunk.size}
            )
        self._bbox = {}
        for r in range(self.n_regions):
            ts = [t for t in range(self.n_frames) if r in self._pixels[t]]
            y0 = y1 = x0 = x1 = None
            for t in ts:
                ys, xs = self.pixels(r, t)
                y0 = ys.min() if y0 is None else min(y0, ys.min())
                y1 = ys.max() if y1 is None else max(y1, ys.max())
                x0 = xs.min() if x0 is None else min(x0, xs.min())
                x1 = xs.max() if x1 is None else max(x1, xs.max())
            self._bbox[r] = (ts[0], ts[-1], int(y0), int(y1), int(x0), int(x1))
        self.adjacency = self._build_adjacency()

    def _build_adjacency(self):
        pairs = set()
        labels = self.labels
        for t in range(self.n_frames):
            f = labels[t]
            for a, b in (
                (f[:, :-1], f[:, 1:]),
                (f[:-1, :], f[1:, :]),
            ):
                mask = a != b
                lo = np.minimum(a[mask], b[mask])
                hi = np.maximum(a[mask], b[mask])
                pairs.update(zip(lo.tolist(), hi.tolist()))
        return pairs

    def pixels(self, region, frame):
        """(ys, xs) of the region's pixels in one frame."""
        flat = self._pixels[frame].get(region)
        if flat is None:
            return np.array([], dtype=np.int64), np.array([], dtype=np.int64)
        return flat // self.width, flat % self.width

    def frames_of(self, region):
        return [t for t in range(self.n_frames) if region in self._pixels[t]]

    def slice_count(self, region, frame):
        flat = self._pixels[frame].get(region)
        return 0 if flat is None else int(flat.size)

    def bbox(self, region):
        """(t0, t1, y0, y1, x0, x1) inclusive bounds."""
        return self._bbox[region]


def build_region_index(labels):
    return RegionIndex(labels)
