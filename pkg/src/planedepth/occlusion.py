"""Occlusion boundaries between adjacent regions.

An edgelet is the boundary a region pair (i, j), i < j, shares in one
frame: the pixels of region i that are 4-adjacent to region j, stored with
their paired j-side pixels.  Each edgelet gets a 16-value feature vector
(block differences of the two regions plus flow-consistency measures), a
forest-classified probability of being NON-occluding, a pairwise smoothing
pass over edgelets that share a region endpoint in the frame, and a
temporal averaging pass along the (i, j) track.  The final probability is
the gate y_ij that scales the depth MRF's smoothness terms.

Ground-truth labels come from depth: a boundary whose median absolute
depth gap across paired pixels exceeds ``OCCLUSION_DEPTH_GAP`` (2 m) is
occluding.
"""

from dataclasses import dataclass, field

import json
import numpy as np

from .errors import DimensionMismatchError, EmptyInputError, NotTrainedError
from .features import FEATURE_BLOCKS, MOTION_VALUES_PER_OFFSET

OCCLUSION_DEPTH_GAP = 2.0
EDGELET_FEATURE_LENGTH = 16
NON_OCCLUDING = 1  # classifier class index; class 0 is occluding


@dataclass
class Edgelet:
    i: int
    j: int
    frame: int
    ys_i: np.ndarray
    xs_i: np.ndarray
    ys_j: np.ndarray
    xs_j: np.ndarray
    features: np.ndarray = None
    unary: float = None
    p_non_occl: float = None

    @property
    def boundary_size(self):
        """Number of distinct region-i pixels on the boundary."""
        return int(np.unique(self.ys_i * (self.xs_i.max() + 1) + self.xs_i).size)


def extract_edgelets(labels_frame, frame_idx=0):
    """One edgelet per 4-adjacent region pair in the frame."""
    labels_frame = np.asarray(labels_frame)
    if labels_frame.ndim != 2:
        raise DimensionMismatchError("expected a single (h, w) label frame")
    buckets = {}
    for dy, dx in ((0, 1), (1, 0)):
        a = labels_frame[: labels_frame.shape[0] - dy, : labels_frame.shape[1] - dx]
        b = labels_frame[dy:, dx:]
        ys, xs = np.nonzero(a != b)
        la = a[ys, xs]
        lb = b[ys, xs]
        # the i side is the smaller label; record the pixel on each side
        swap = la > lb
        pi = (np.where(swap, ys + dy, ys), np.where(swap, xs + dx, xs))
        pj = (np.where(swap, ys, ys + dy), np.where(swap, xs, xs + dx))
        lo = np.minimum(la, lb)
        hi = np.maximum(la, lb)
        for k in range(ys.size):
            buckets.setdefault((int(lo[k]), int(hi[k])), []).append(
                (int(pi[0][k]), int(pi[1][k]), int(pj[0][k]), int(pj[1][k]))
            )
    edgelets = []
    for (i, j), pairs in sorted(buckets.items()):
        arr = np.unique(np.asarray(pairs, dtype=np.int64), axis=0)
        edgelets.append(
            Edgelet(i, j, frame_idx, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
        )
    return edgelets


def edgelet_features(e, feats_i, feats_j, flow=None, frame=None, next_frame=None):
    """16 values: |color diff| (6), |geom diff| (5), motion-block L2 per
    offset (3), cross-boundary flow difference and warp error (2)."""
    feats_i = np.asarray(feats_i, dtype=np.float64)
    feats_j = np.asarray(feats_j, dtype=np.float64)
    if feats_i.shape != feats_j.shape:
        raise DimensionMismatchError("region feature vectors differ in shape")
    color = np.abs(feats_i[FEATURE_BLOCKS["color"]] - feats_j[FEATURE_BLOCKS["color"]])
    geom = np.abs(feats_i[FEATURE_BLOCKS["geom"]] - feats_j[FEATURE_BLOCKS["geom"]])
    mi = feats_i[FEATURE_BLOCKS["motion"]].reshape(-1, MOTION_VALUES_PER_OFFSET)
    mj = feats_j[FEATURE_BLOCKS["motion"]].reshape(-1, MOTION_VALUES_PER_OFFSET)
    motion_l2 = np.linalg.norm(mi - mj, axis=1)
    flow_diff = 0.0
    warp_err = 0.0
    if flow is not None:
        fi = flow[e.ys_i, e.xs_i]
        fj = flow[e.ys_j, e.xs_j]
        flow_diff = float(np.linalg.norm(fi - fj, axis=1).mean())
        if frame is not None and next_frame is not None:
            from .flow import _bilinear_sample

            ys = np.concatenate([e.ys_i, e.ys_j]).astype(np.float64)
            xs = np.concatenate([e.xs_i, e.xs_j]).astype(np.float64)
            f = flow[np.concatenate([e.ys_i, e.ys_j]),
                     np.concatenate([e.xs_i, e.xs_j])]
            here = np.asarray(frame, dtype=np.float64)[
                ys.astype(np.int64), xs.astype(np.int64)
            ] / 255.0
            there = _bilinear_sample(
                np.asarray(next_frame, dtype=np.float64) / 255.0,
                ys + f[:, 1], xs + f[:, 0],
            )
            diff = here - there
            err = np.abs(diff) if diff.ndim == 1 else np.linalg.norm(diff, axis=1)
            warp_err = float(err.mean())
    out = np.concatenate([color, geom, motion_l2, [flow_diff, warp_err]])
    if out.shape != (EDGELET_FEATURE_LENGTH,):
        raise DimensionMismatchError("edgelet feature assembly went wrong")
    return out


@dataclass
class EdgeletGraph:
    edgelets: list = field(default_factory=list)

    def __post_init__(self):
        self._connectivity = None
        self._tracks = None

    def connectivity(self, n):
        """Edgelet indices sharing a region endpoint with n in n's frame."""
        if self._connectivity is None:
            by_key = {}
            for idx, e in enumerate(self.edgelets):
                by_key.setdefault((e.frame, e.i), []).append(idx)
                by_key.setdefault((e.frame, e.j), []).append(idx)
            self._connectivity = []
            for idx, e in enumerate(self.edgelets):
                nb = set(by_key[(e.frame, e.i)]) | set(by_key[(e.frame, e.j)])
                nb.discard(idx)
                self._connectivity.append(sorted(nb))
        return self._connectivity[n]

    @property
    def tracks(self):
        """(i, j) -> edgelet indices ordered by frame."""
        if self._tracks is None:
            self._tracks = {}
            for idx, e in enumerate(self.edgelets):
                self._tracks.setdefault((e.i, e.j), []).append(idx)
            for key in self._tracks:
                self._tracks[key].sort(key=lambda k: self.edgelets[k].frame)
        return self._tracks

    def gates(self):
        """(i, j, frame) -> final non-occlusion probability y_ij."""
        return {
            (e.i, e.j, e.frame): e.p_non_occl
            for e in self.edgelets
            if e.p_non_occl is not None
        }


def build_graph(labels):
    """Edgelet graph over every frame of a label map volume."""
    labels = np.asarray(labels)
    if labels.ndim != 3:
        raise DimensionMismatchError("label maps are (frames, h, w)")
    edgelets = []
    for t in range(labels.shape[0]):
        edgelets.extend(extract_edgelets(labels[t], t))
    return EdgeletGraph(edgelets)


def classify_edgelets(graph, model):
    """Set each edgelet's unary non-occlusion probability from the forest."""
    from . import forest

    if not model.trees:
        raise NotTrainedError("occlusion model has no trees")
    if not graph.edgelets:
        return graph
    if any(e.features is None for e in graph.edgelets):
        raise EmptyInputError("edgelet features must be computed first")
    rows = np.asarray([e.features for e in graph.edgelets])
    probs = forest.predict(model, rows)
    p_non = probs[:, NON_OCCLUDING] if probs.shape[1] > NON_OCCLUDING else 1.0 - probs[:, 0]
    for e, p in zip(graph.edgelets, p_non):
        e.unary = float(p)
        e.p_non_occl = float(p)
    return graph


def smooth_pairwise(graph, iterations=3, damping=0.5):
    """Couple connected edgelets with the sqrt(P P) pairwise term.

    Damped synchronous updates: each edgelet's two state scores are its
    unary times, over connected edgelets, the geometric mean of the
    state-consistent probabilities; the renormalized score is blended with
    the previous probability by ``damping`` (the undamped update is
    bistable: a few confident neighbors can run away with a contradicting
    unary).  Isolated edgelets keep their unary exactly.
    """
    edgelets = graph.edgelets
    if any(e.p_non_occl is None for e in edgelets):
        raise EmptyInputError("classify_edgelets must run before smoothing")
    p = np.array([e.p_non_occl for e in edgelets], dtype=np.float64)
    g = np.array([e.unary for e in edgelets], dtype=np.float64)
    for _ in range(iterations):
        new = np.empty_like(p)
        for n in range(p.size):
            s_non = g[n]
            s_occ = 1.0 - g[n]
            for m in graph.connectivity(n):
                s_non *= np.sqrt(p[n] * p[m])
                s_occ *= np.sqrt((1.0 - p[n]) * (1.0 - p[m]))
            z = s_non + s_occ
            new[n] = s_non / z if z > 0 else g[n]
        p = (1.0 - damping) * p + damping * new
    for e, value in zip(edgelets, np.clip(p, 0.0, 1.0)):
        e.p_non_occl = float(value)
    return graph


def temporal_smooth(graph, window=30):
    """Average each (i, j) track's probability over a centered window.

    A window of w frames at frame t covers [t - w//2, t + w - w//2 - 1],
    intersected with the frames where the track exists; window=1 is the
    identity.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    edgelets = graph.edgelets
    updates = {}
    for track in graph.tracks.values():
        frames = np.array([edgelets[k].frame for k in track])
        probs = np.array([edgelets[k].p_non_occl for k in track], dtype=np.float64)
        lo = frames - window // 2
        hi = frames + (window - window // 2) - 1
        for pos, k in enumerate(track):
            mask = (frames >= lo[pos]) & (frames <= hi[pos])
            updates[k] = float(probs[mask].mean())
    for k, value in updates.items():
        edgelets[k].p_non_occl = value
    return graph


def label_edgelets_from_depth(graph, depth_maps, gap=OCCLUSION_DEPTH_GAP):
    """Class labels from ground truth: 1 (non-occluding) unless the median
    |depth gap| across the boundary exceeds ``gap`` meters."""
    labels = []
    for e in graph.edgelets:
        dm = depth_maps[e.frame]
        di = dm.values[e.ys_i, e.xs_i]
        dj = dm.values[e.ys_j, e.xs_j]
        ok = dm.valid[e.ys_i, e.xs_i] & dm.valid[e.ys_j, e.xs_j]
        if not ok.any():
            labels.append(NON_OCCLUDING)
            continue
        median_gap = float(np.median(np.abs(di[ok] - dj[ok])))
        labels.append(0 if median_gap > gap else NON_OCCLUDING)
    return np.asarray(labels, dtype=np.int64)


# ---------------------------------------------------------------------------
# JSON-lines serialization (pair, frame, |B|, features, probability)

def write_edgelets_jsonl(path, graph):
    from .formats import atomic_write_bytes

    lines = []
    for e in graph.edgelets:
        lines.append(json.dumps({
            "i": e.i,
            "j": e.j,
            "frame": e.frame,
            "boundary_size": e.boundary_size,
            "features": None if e.features is None else
                        [float(v) for v in e.features],
            "p_non_occl": e.p_non_occl,
        }, sort_keys=True))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_edgelets_jsonl(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
