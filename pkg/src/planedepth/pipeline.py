"""End-to-end wiring: segmentation -> features -> unary depth -> occlusion
gates -> per-frame plane MRF -> temporal smoothing -> rendered depth.

Functions here are deliberately thin compositions of the other modules so
each stage stays independently testable; the CLI and the cross-validation
harness both drive this module.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import flow as flow_mod
from . import forest as forest_mod
from . import occlusion as occl_mod
from .errors import EmptyInputError, NotTrainedError
from .features import (
    MOTION_OFFSETS,
    MotionMaps,
    ablation_columns,
    assemble_features,
    color_features,
    feature_names,
    geometric_features,
    location_features,
    motion_features,
    texture_features,
    texture_responses,
)
from .geometry import CameraIntrinsics, DepthMap, ray_grid, region_centroid_pixel
from .mrf import (
    MrfProblem,
    PairTerm,
    RegionSamples,
    solve,
    temporal_plane_smooth,
    unary_only_fits,
)
from .segmentation import RegionIndex


@dataclass
class PipelineConfig:
    """Every knob of the pipeline, round-trippable through key=value files."""

    # camera (None: focal max(w, h), principal point at the center)
    fu: float = None
    fv: float = None
    u0: float = None
    v0: float = None
    horizon_row: float = None   # None: principal-point row
    # segmentation
    merge_threshold: float = 300.0
    min_region_size: int = 64
    # optical flow
    flow_levels: int = 3
    flow_iterations: int = 100
    flow_smoothness: float = 15.0
    # forest
    n_trees: int = 105
    n_features_per_node: int = 11
    max_tree_depth: int = 35
    min_samples_leaf: int = 5
    # MRF
    lambda_conn: float = 1.0
    lambda_cop: float = 0.5
    coplanarity_both_directions: bool = True
    max_samples_per_region: int = 200
    solver_max_iter: int = 500
    solver_grad_tol: float = 1e-8
    lbfgs_memory: int = 10
    use_mrf: bool = True
    # temporal windows
    depth_window: int = 5
    occlusion_window: int = 30
    pairwise_iterations: int = 3
    occlusion_depth_gap: float = 2.0
    gt_window: int = 5
    # misc
    seed: int = 0
    ablation: str = "ALL"

    def forest_params(self, seed_offset=0):
        return forest_mod.ForestParams(
            n_trees=self.n_trees,
            n_features_per_node=self.n_features_per_node,
            max_depth=self.max_tree_depth,
            min_samples_leaf=self.min_samples_leaf,
            seed=self.seed + seed_offset,
        )

    def camera(self, width, height):
        if self.fu is None or self.fv is None:
            return CameraIntrinsics.default(width, height)
        u0 = (width - 1) / 2.0 if self.u0 is None else self.u0
        v0 = (height - 1) / 2.0 if self.v0 is None else self.v0
        return CameraIntrinsics(self.fu, self.fv, u0, v0)

    def horizon(self, K):
        return K.v0 if self.horizon_row is None else self.horizon_row

    def to_mapping(self):
        out = {}
        for key, value in asdict(self).items():
            out[key] = "" if value is None else repr(value)
        return out

    @classmethod
    def from_mapping(cls, mapping):
        import ast

        kwargs = {}
        fields = cls.__dataclass_fields__
        for key, raw in mapping.items():
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = None if raw == "" else ast.literal_eval(raw)
        return cls(**kwargs)

    def save(self, path):
        from .formats import write_keyvalue

        write_keyvalue(path, self.to_mapping())

    @classmethod
    def load(cls, path):
        from .formats import read_keyvalue

        return cls.from_mapping(read_keyvalue(path))


# ---------------------------------------------------------------------------
# flows

def compute_forward_flows(video, config):
    """Forward field per consecutive pair (feeds segmentation)."""
    return [
        flow_mod.dense_flow(
            video[t], video[t + 1],
            pyramid_levels=config.flow_levels,
            iterations=config.flow_iterations,
            smoothness=config.flow_smoothness,
        )
        for t in range(video.shape[0] - 1)
    ]


def motion_entries_for_frame(video, j, config, backward_cache):
    """(MotionMaps, padded) for each feature offset at frame j."""
    entries = []
    for offset in MOTION_OFFSETS:
        field_, padded = flow_mod.flow_to(
            list(video), j, offset, cache=backward_cache,
            pyramid_levels=config.flow_levels,
            iterations=config.flow_iterations,
            smoothness=config.flow_smoothness,
        )
        entries.append((MotionMaps(field_) if not padded else field_, padded))
    return entries


# ---------------------------------------------------------------------------
# region features

def region_feature_table(video, labels, gc_maps, config, rindex=None,
                         backward_cache=None):
    """Feature rows for every non-empty region slice.

    Returns (rows, keys, rindex) with keys aligned as (region, frame).
    """
    video = np.asarray(video)
    rindex = rindex or RegionIndex(labels)
    backward_cache = {} if backward_cache is None else backward_cache
    K = config.camera(video.shape[2], video.shape[1])
    horizon = config.horizon(K)
    rows, keys = [], []
    for t in range(rindex.n_frames):
        responses = texture_responses(video[t])
        entries = motion_entries_for_frame(video, t, config, backward_cache)
        for r in range(rindex.n_regions):
            ys, xs = rindex.pixels(r, t)
            if ys.size == 0:
                continue
            rows.append(assemble_features(
                color_features(video[t], ys, xs),
                texture_features(video[t], ys, xs, responses),
                location_features(ys, video.shape[1], horizon),
                motion_features(entries, ys, xs),
                geometric_features(gc_maps[t], ys, xs),
            ))
            keys.append((r, t))
    if not rows:
        raise EmptyInputError("no region slices to featurize")
    return np.asarray(rows), keys, rindex


def slice_mean_depths(gt_maps, rindex):
    """(region, frame) -> mean valid ground-truth depth, skipping slices
    without any valid pixel."""
    out = {}
    for t in range(rindex.n_frames):
        dm = gt_maps[t]
        for r in range(rindex.n_regions):
            ys, xs = rindex.pixels(r, t)
            if ys.size == 0:
                continue
            ok = dm.valid[ys, xs]
            if ok.any():
                out[(r, t)] = float(dm.values[ys, xs][ok].mean())
    return out


def depth_training_data(rows, keys, gt_maps, rindex):
    """Training matrix and log10-depth targets for the depth forest."""
    targets = slice_mean_depths(gt_maps, rindex)
    X, y = [], []
    for row, key in zip(rows, keys):
        depth = targets.get(key)
        if depth is not None and depth > 0:
            X.append(row)
            y.append(np.log10(depth))
    if not X:
        raise EmptyInputError("no region slice has valid ground truth")
    return np.asarray(X), np.asarray(y)


def train_depth_forest(X, y, config, ablation=None):
    """Depth regressor on log10 targets, optionally on an ablated block set."""
    ablation = ablation or config.ablation
    cols = ablation_columns(ablation)
    names = [feature_names()[c] for c in cols]
    return forest_mod.train(
        X[:, cols], y, config.forest_params(), task="regression",
        compute_importance=False, feature_names=names,
    )


def predict_unary_depths(model, rows, keys, ablation="ALL"):
    """(region, frame) -> meters, exponentiated from the log10 prediction."""
    cols = ablation_columns(ablation)
    preds = forest_mod.predict(model, np.asarray(rows)[:, cols])
    preds = np.atleast_1d(preds)
    return {key: float(10.0**p) for key, p in zip(keys, preds)}


# ---------------------------------------------------------------------------
# occlusion stage

def occlusion_graph(video, labels, rows, keys, config, rindex=None,
                    backward_cache=None):
    """Edgelet graph with features filled from the region feature table."""
    video = np.asarray(video)
    rindex = rindex or RegionIndex(labels)
    backward_cache = {} if backward_cache is None else backward_cache
    by_key = {key: row for key, row in zip(keys, rows)}
    graph = occl_mod.build_graph(labels)
    for e in graph.edgelets:
        fi = by_key.get((e.i, e.frame))
        fj = by_key.get((e.j, e.frame))
        if fi is None or fj is None:
            raise EmptyInputError(
                f"regions {e.i}/{e.j} of frame {e.frame} lack features"
            )
        t = e.frame
        if t + 1 < video.shape[0]:
            # forward field approximated by the reverse of the backward one
            back = flow_mod.dense_flow(
                video[t + 1], video[t],
                pyramid_levels=config.flow_levels,
                iterations=config.flow_iterations,
                smoothness=config.flow_smoothness,
            ) if (t + 1) not in backward_cache else backward_cache[t + 1]
            backward_cache[t + 1] = back
            fwd = -back
            nxt = video[t + 1]
        else:
            fwd = np.zeros(video.shape[1:3] + (2,))
            nxt = video[t]
        e.features = occl_mod.edgelet_features(e, fi, fj, fwd, video[t], nxt)
    return graph


def train_occlusion_forest(graphs, gt_maps_list, config):
    """Classifier from ground-truth depth gaps over one or more videos."""
    rows, labels = [], []
    for graph, gt_maps in zip(graphs, gt_maps_list):
        lab = occl_mod.label_edgelets_from_depth(
            graph, gt_maps, gap=config.occlusion_depth_gap
        )
        for e, y in zip(graph.edgelets, lab):
            rows.append(e.features)
            labels.append(int(y))
    if not rows:
        raise EmptyInputError("no edgelets to train on")
    params = forest_mod.ForestParams(
        n_trees=min(config.n_trees, 60),
        n_features_per_node=min(config.n_features_per_node, 5),
        max_depth=min(config.max_tree_depth, 16),
        min_samples_leaf=config.min_samples_leaf,
        seed=config.seed + 1,
    )
    return forest_mod.train(
        np.asarray(rows), np.asarray(labels), params,
        task="classification", compute_importance=False,
    )


def smoothed_gates(graph, model, config):
    """Classify, smooth pairwise, smooth temporally; return y_ij gates."""
    occl_mod.classify_edgelets(graph, model)
    occl_mod.smooth_pairwise(graph, iterations=config.pairwise_iterations)
    occl_mod.temporal_smooth(graph, window=config.occlusion_window)
    return graph.gates()


# ---------------------------------------------------------------------------
# MRF assembly and solving

def _subsample(ys, xs, limit):
    if ys.size <= limit:
        return ys, xs
    pick = np.unique(np.linspace(0, ys.size - 1, limit).round().astype(np.int64))
    return ys[pick], xs[pick]


def build_frame_problem(labels_frame, frame, rindex, K, unary_fn, gates,
                        config, rays=None):
    """MrfProblem for one frame.

    unary_fn(region, ys, xs) returns the per-sample unary depths; gates maps
    (i, j, frame) or (i, j) to y_ij (missing pairs default to 1.0).
    Returns (problem, region_ids) with region_ids mapping local indices
    back to label-map ids.
    """
    labels_frame = np.asarray(labels_frame)
    rays = ray_grid(K, labels_frame.shape[1], labels_frame.shape[0]) if rays is None else rays
    region_ids = [
        r for r in range(rindex.n_regions)
        if rindex.slice_count(r, frame) > 0
    ]
    local = {r: k for k, r in enumerate(region_ids)}
    regions, centers, means = [], {}, {}
    for r in region_ids:
        ys, xs = rindex.pixels(r, frame)
        sy, sx = _subsample(ys, xs, config.max_samples_per_region)
        depths = np.asarray(unary_fn(r, sy, sx), dtype=np.float64)
        regions.append(RegionSamples(rays[sy, sx], depths))
        cy, cx = region_centroid_pixel(ys, xs)
        centers[r] = rays[cy, cx]
        means[r] = float(depths.mean())
    pairs = []
    for e in occl_mod.extract_edgelets(labels_frame, frame):
        gate = gates.get((e.i, e.j, frame), gates.get((e.i, e.j), 1.0))
        if gate is None:
            gate = 1.0
        by, bx = _subsample(e.ys_i, e.xs_i, config.max_samples_per_region)
        pairs.append(PairTerm(
            local[e.i], local[e.j],
            boundary_rays=rays[by, bx],
            gate=float(gate),
            center_ray_i=centers[e.i],
            center_ray_j=centers[e.j],
            depth_i=means[e.i],
            depth_j=means[e.j],
        ))
    problem = MrfProblem(
        regions, pairs,
        lambda_conn=config.lambda_conn,
        lambda_cop=config.lambda_cop,
        coplanarity_both_directions=config.coplanarity_both_directions,
    )
    return problem, region_ids


def solve_video(labels, K, unary_fn_for_frame, gates, config):
    """Per-frame MRF solves plus temporal plane smoothing.

    unary_fn_for_frame(frame) -> unary_fn(region, ys, xs).
    Returns (depth_maps, alphas_by_frame, solutions).
    """
    labels = np.asarray(labels)
    rindex = RegionIndex(labels)
    rays = ray_grid(K, labels.shape[2], labels.shape[1])
    alphas_by_frame = []
    solutions = []
    for t in range(labels.shape[0]):
        problem, region_ids = build_frame_problem(
            labels[t], t, rindex, K, unary_fn_for_frame(t), gates, config,
            rays=rays,
        )
        if config.use_mrf:
            sol = solve(problem, max_iter=config.solver_max_iter,
                        grad_tol=config.solver_grad_tol,
                        lbfgs_memory=config.lbfgs_memory)
            alphas = sol.alphas
            solutions.append(sol)
        else:
            alphas = unary_only_fits(problem)
            solutions.append(None)
        alphas_by_frame.append(
            {r: alphas[k] for k, r in enumerate(region_ids)}
        )
    from .mrf import temporal_depth_smooth

    depth_maps = temporal_depth_smooth(labels, alphas_by_frame, K,
                                       window=config.depth_window)
    return depth_maps, alphas_by_frame, solutions


def render_unary_maps(labels, unary_by_slice):
    """Region-constant depth maps straight from the unary predictions
    (the no-smoothness baseline for evaluation)."""
    labels = np.asarray(labels)
    maps = []
    for t in range(labels.shape[0]):
        values = np.zeros(labels.shape[1:])
        valid = np.zeros(labels.shape[1:], dtype=bool)
        for r in np.unique(labels[t]):
            d = unary_by_slice.get((int(r), t))
            if d is not None:
                mask = labels[t] == r
                values[mask] = d
                valid[mask] = True
        maps.append(DepthMap(values, valid))
    return maps


# ---------------------------------------------------------------------------
# whole-video inference paths

def unary_fn_from_predictions(unary_by_slice):
    def for_frame(t):
        def fn(region, ys, xs):
            depth = unary_by_slice.get((region, t))
            if depth is None:
                raise NotTrainedError(
                    f"no unary depth for region {region} frame {t}"
                )
            return np.full(ys.size, depth)

        return fn

    return for_frame


def unary_fn_from_depth_maps(depth_maps):
    def for_frame(t):
        def fn(region, ys, xs):
            return depth_maps[t].values[ys, xs]

        return fn

    return for_frame


def infer_video(video, labels, gc_maps, depth_model, occlusion_model,
                config, backward_cache=None):
    """Learned path: features -> unary depths -> gates -> MRF -> smoothing."""
    video = np.asarray(video)
    K = config.camera(video.shape[2], video.shape[1])
    backward_cache = {} if backward_cache is None else backward_cache
    rows, keys, rindex = region_feature_table(
        video, labels, gc_maps, config, backward_cache=backward_cache
    )
    unary = predict_unary_depths(depth_model, rows, keys, config.ablation)
    graph = occlusion_graph(video, labels, rows, keys, config, rindex,
                            backward_cache)
    gates = smoothed_gates(graph, occlusion_model, config)
    maps, alphas, _ = solve_video(
        labels, K, unary_fn_from_predictions(unary), gates, config
    )
    return maps, alphas, unary, graph
