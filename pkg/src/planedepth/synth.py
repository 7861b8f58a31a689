"""Synthetic piecewise-planar scenes with exact ground truth.

Scenes pair a textured video with the true region layout, plane
parameters, depth maps, layout-class confidences, and occlusion labels
(every boundary whose median rendered depth gap exceeds 2 m), all mutually
consistent.  Two families:

* layered_scene_spec: vertical-strip layouts whose planes sit on
  multiplicatively separated depth layers, with some planes split into two
  adjacent regions.  Cross-layer boundaries are guaranteed occluding and
  same-plane boundaries non-occluding, so the true planes are the exact
  optimum of the gated MRF energy.
* outdoor_scene_spec: sky strip + ground plane + standing objects, with
  class-correlated depth and movable objects whose texture scroll speed
  falls off with distance.  Used for learned-path and ablation runs.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError
from .geometry import D_MAX, CameraIntrinsics, render_depth
from .occlusion import OCCLUSION_DEPTH_GAP, build_graph, label_edgelets_from_depth

GC_CLASS_INDEX = {"sky": 0, "ground": 1, "solid": 2, "porous": 3, "movable": 4}


@dataclass
class SceneSpec:
    width: int
    height: int
    n_frames: int
    K: CameraIntrinsics
    layout: np.ndarray            # (h, w) int32 region ids, static over time
    alphas: dict                  # region -> (3,) plane parameters
    classes: dict                 # region -> layout-class index
    colors: dict                  # region -> base RGB (0..255)
    scrolls: dict = field(default_factory=dict)  # region -> (du, dv) px/frame
    bands: dict = field(default_factory=dict)    # region -> (band px, n tints)
    noise_amplitude: float = 8.0
    horizon_row: float = None     # defaults to the principal-point row
    seed: int = 0

    def __post_init__(self):
        self.layout = np.asarray(self.layout, dtype=np.int32)
        ids = np.unique(self.layout)
        if ids.size == 0:
            raise EmptyInputError("layout is empty")
        if not np.array_equal(ids, np.arange(ids.size)):
            raise ValueError("layout region ids must be contiguous from 0")
        missing = [r for r in ids if int(r) not in self.alphas]
        if missing:
            raise ValueError(f"regions without planes: {missing}")
        if self.horizon_row is None:
            self.horizon_row = self.K.v0


@dataclass
class Scene:
    spec: SceneSpec
    video: np.ndarray        # (t, h, w, 3) uint8
    labels: np.ndarray       # (t, h, w) int32
    depth_maps: list         # per frame DepthMap
    alphas: dict             # region -> (3,)
    gc_maps: np.ndarray      # (t, h, w, 5) one-hot by true class
    occluding: dict          # (i, j, frame) -> bool

    @property
    def K(self):
        return self.spec.K

    @property
    def horizon_row(self):
        return self.spec.horizon_row

    def gates(self):
        """Oracle occlusion gates: y=0 across occluding boundaries, else 1."""
        return {
            key: 0.0 if occ else 1.0 for key, occ in self.occluding.items()
        }

    def alphas_by_frame(self):
        return [dict(self.alphas) for _ in range(self.spec.n_frames)]


def generate_scene(spec):
    """Render a SceneSpec into a fully ground-truthed Scene."""
    rng = np.random.default_rng(spec.seed)
    h, w = spec.layout.shape
    labels = np.broadcast_to(spec.layout, (spec.n_frames, h, w)).copy()
    depth = render_depth(spec.layout, spec.alphas, spec.K)
    depth_maps = [depth.copy() for _ in range(spec.n_frames)]

    # per-region wrapped noise textures, scrolled per frame; banded regions
    # get horizontal tint stripes so a segmenter splits them by depth level
    textures = {}
    for r in spec.alphas:
        base = np.asarray(spec.colors[r], dtype=np.float64)
        tex = base[None, None, :] + rng.uniform(
            -spec.noise_amplitude, spec.noise_amplitude, (h, w, 3)
        )
        if r in spec.bands:
            band_h, n_tints = spec.bands[r]
            palette = rng.uniform(-50.0, 50.0, (n_tints, 3))
            tex += palette[(np.arange(h) // band_h) % n_tints][:, None, :]
        textures[r] = tex
    video = np.zeros((spec.n_frames, h, w, 3), dtype=np.uint8)
    ys, xs = np.mgrid[0:h, 0:w]
    for t in range(spec.n_frames):
        frame = np.zeros((h, w, 3))
        for r, tex in textures.items():
            du, dv = spec.scrolls.get(r, (0.0, 0.0))
            sy = np.mod(ys - round(t * dv), h)
            sx = np.mod(xs - round(t * du), w)
            mask = spec.layout == r
            frame[mask] = tex[sy[mask], sx[mask]]
        video[t] = np.clip(frame, 0, 255).astype(np.uint8)

    gc_maps = np.zeros((spec.n_frames, h, w, 5), dtype=np.float64)
    for r, cls in spec.classes.items():
        gc_maps[:, spec.layout == r, cls] = 1.0

    graph = build_graph(labels)
    occ = label_edgelets_from_depth(graph, depth_maps)
    occluding = {
        (e.i, e.j, e.frame): bool(lab == 0)
        for e, lab in zip(graph.edgelets, occ)
    }
    return Scene(spec, video, labels, depth_maps,
                 {r: np.asarray(a, dtype=np.float64) for r, a in spec.alphas.items()},
                 gc_maps, occluding)


def boundary_median_gaps(labels_frame, depth_map):
    """(i, j) -> median |depth gap| across the shared boundary."""
    from .occlusion import extract_edgelets

    gaps = {}
    for e in extract_edgelets(labels_frame):
        di = depth_map.values[e.ys_i, e.xs_i]
        dj = depth_map.values[e.ys_j, e.xs_j]
        gaps[(e.i, e.j)] = float(np.median(np.abs(di - dj)))
    return gaps


def _distinct_colors(rng, n):
    """Well-separated base colors via spaced hues."""
    from .colors import hsv_to_rgb

    hues = (np.arange(n) / n + rng.uniform(0, 1.0 / n)) % 1.0
    rng.shuffle(hues)
    sat = rng.uniform(0.45, 0.85, n)
    val = rng.uniform(0.55, 0.9, n)
    rgb = hsv_to_rgb(np.stack([hues, sat, val], axis=-1)) * 255.0
    return [rgb[i] for i in range(n)]


def _bounded_tilt_plane(rng, depth_at_axis, tilt=0.08):
    """Plane with the given on-axis depth and a tilt small enough to keep
    every in-frustum depth within ~40% of the axis depth."""
    tx = rng.uniform(-tilt, tilt)
    ty = rng.uniform(-tilt, tilt)
    return np.array([tx, ty, 1.0]) / depth_at_axis


def layered_scene_spec(rng, n_regions, width=64, height=48, n_frames=10,
                       seed=None):
    """Vertical-strip scene on separated depth layers with split planes.

    Layers are spaced by a factor 1.8 so every cross-layer boundary gap
    clears the 2 m occlusion threshold with margin; planes assigned to two
    adjacent strips create guaranteed non-occluding boundaries.  Verified
    after rendering (bounded deterministic retries).
    """
    if n_regions < 2:
        raise ValueError("need at least 2 regions")
    seed = int(rng.integers(2**31)) if seed is None else seed
    for attempt in range(20):
        local = np.random.default_rng(np.random.SeedSequence((seed, attempt)))
        n_splits = int(local.integers(1, max(2, n_regions // 2) + 1))
        n_planes = n_regions - n_splits
        if n_planes < 1:
            n_planes, n_splits = 1, n_regions - 1
        base = local.uniform(4.5, 6.5)
        depths = base * 1.8 ** np.arange(n_planes)
        depths = depths[depths < 0.7 * D_MAX]
        n_planes = depths.size
        planes = [_bounded_tilt_plane(local, d) for d in depths]
        # assign planes to strips; split planes occupy two adjacent strips
        plane_ids = list(range(n_planes))
        local.shuffle(plane_ids)
        strip_planes = []
        splittable = plane_ids.copy()
        while len(strip_planes) < n_regions:
            if splittable and len(strip_planes) + 2 <= n_regions and (
                len(strip_planes) + len(splittable) < n_regions
                or local.random() < 0.7
            ):
                p = splittable.pop(0)
                strip_planes += [p, p]
            elif splittable:
                strip_planes.append(splittable.pop(0))
            else:
                strip_planes.append(int(local.integers(n_planes)))
        strip_planes = strip_planes[:n_regions]
        edges = np.linspace(0, width, n_regions + 1).astype(int)
        layout = np.zeros((height, width), dtype=np.int32)
        for r in range(n_regions):
            layout[:, edges[r] : edges[r + 1]] = r
        K = CameraIntrinsics.default(width, height)
        alphas = {r: planes[strip_planes[r]] for r in range(n_regions)}
        # one surface, one appearance: split regions share their plane's
        # base color up to a small jitter, so appearance difference tracks
        # the occlusion labels
        plane_colors = _distinct_colors(local, n_planes)
        colors = {
            r: np.clip(
                plane_colors[strip_planes[r]] + local.uniform(-12, 12, 3),
                0, 255,
            )
            for r in range(n_regions)
        }
        spec = SceneSpec(
            width=width, height=height, n_frames=n_frames, K=K,
            layout=layout, alphas=alphas,
            classes={r: GC_CLASS_INDEX["solid"] for r in range(n_regions)},
            colors=colors,
            seed=int(local.integers(2**31)),
        )
        depth = render_depth(layout, alphas, K)
        gaps = boundary_median_gaps(layout, depth)
        ok = True
        for (i, j), gap in gaps.items():
            same_plane = strip_planes[i] == strip_planes[j]
            if same_plane and gap > 0.5 * OCCLUSION_DEPTH_GAP:
                ok = False
            if not same_plane and gap < 1.25 * OCCLUSION_DEPTH_GAP:
                ok = False
        has_split = any(
            strip_planes[i] == strip_planes[j] for (i, j) in gaps
        )
        if ok and has_split:
            return spec
    raise RuntimeError("could not build a verified layered scene")


def outdoor_scene_spec(rng, width=96, height=72, n_frames=10, n_objects=3,
                       seed=None):
    """Sky + tilted ground + standing objects; depth correlates with the
    layout class and movable objects scroll inversely with depth."""
    seed = int(rng.integers(2**31)) if seed is None else seed
    local = np.random.default_rng(seed)
    K = CameraIntrinsics.default(width, height)
    horizon = int(round(K.v0))
    layout = np.zeros((height, width), dtype=np.int32)
    layout[horizon:, :] = 1
    alphas = {
        0: np.array([0.0, 0.0, 1.0 / (0.985 * D_MAX)]),       # sky, far
        1: np.array([0.0, 1.0 / local.uniform(1.4, 2.0), 0.0]),  # ground
    }
    classes = {0: GC_CLASS_INDEX["sky"], 1: GC_CLASS_INDEX["ground"]}
    scrolls = {}
    next_id = 2
    for k in range(n_objects):
        cls = ("solid", "movable", "porous")[k % 3]
        if cls == "solid":
            depth = local.uniform(22.0, 45.0)
        elif cls == "porous":
            depth = local.uniform(12.0, 22.0)
        else:
            depth = local.uniform(4.0, 11.0)
        ow = int(local.integers(width // 8, width // 4))
        oh = int(local.integers(height // 6, height // 3))
        x0 = int(local.integers(0, width - ow))
        y0 = int(local.integers(max(0, horizon - oh // 3),
                                height - oh))
        layout[y0 : y0 + oh, x0 : x0 + ow] = next_id
        alphas[next_id] = _bounded_tilt_plane(local, depth, tilt=0.03)
        classes[next_id] = GC_CLASS_INDEX[cls]
        if cls == "movable":
            scrolls[next_id] = (30.0 / depth, 0.0)
        next_id += 1
    # objects may fully cover earlier ones; compact ids
    ids, inverse = np.unique(layout, return_inverse=True)
    layout = inverse.reshape(layout.shape).astype(np.int32)
    remap = {old: new for new, old in enumerate(ids.tolist())}
    alphas = {remap[r]: a for r, a in alphas.items() if r in remap}
    classes = {remap[r]: c for r, c in classes.items() if r in remap}
    scrolls = {remap[r]: s for r, s in scrolls.items() if r in remap}
    colors = _distinct_colors(local, len(alphas))
    bands = {
        r: (max(4, height // 10), 4)
        for r, c in classes.items()
        if c == GC_CLASS_INDEX["ground"]
    }
    return SceneSpec(
        width=width, height=height, n_frames=n_frames, K=K, layout=layout,
        alphas=alphas, classes=classes,
        colors={r: colors[r] for r in alphas},
        scrolls=scrolls, bands=bands, horizon_row=float(horizon),
        seed=int(local.integers(2**31)),
    )
