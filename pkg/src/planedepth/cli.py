"""Command-line entry points.

Videos live in directories with a fixed layout (produced by `synth`, or
assembled by hand from real footage):

    scene/
      frames/frame_000000.png ...   input video
      gt/frame_000000.pfm ...       ground-truth depth (synth / sensors)
      true_labels.stseg             generator's region layout (synth only)
      gc.npy                        layout-class confidence maps (t, h, w, 5)
      true_planes.csv               generator's plane parameters (synth only)
      config.txt                    intrinsics / horizon / pipeline knobs
      labels.stseg                  `segment` output
      features.csv                  `features` output
      edgelets.jsonl                `occl` output
      pred/frame_000000.pfm ...     `infer` output (+ planes.csv)

Every command exits nonzero with a diagnostic on contract violations and
writes outputs atomically.
"""

import argparse
import os
import sys

import numpy as np

from . import forest as forest_mod
from . import formats
from . import occlusion as occl_mod
from . import pipeline as pl
from .errors import PlaneDepthError
from .evaluate import crossval, evaluate
from .features import GC_CLASSES, feature_names
from .geometry import DepthMap
from .lidar import Extrinsics, LidarScan, project_lidar
from .segmentation import RegionIndex, segment_video
from .synth import generate_scene, layered_scene_spec, outdoor_scene_spec


def _load_config(args):
    config = (
        pl.PipelineConfig.load(args.config)
        if getattr(args, "config", None)
        else pl.PipelineConfig()
    )
    for attr, key in (
        ("seed", "seed"),
        ("ablation", "ablation"),
        ("lambda_conn", "lambda_conn"),
        ("lambda_cop", "lambda_cop"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(config, key, value)
    return config


def _scene_dirs(corpus):
    dirs = sorted(
        os.path.join(corpus, d)
        for d in os.listdir(corpus)
        if os.path.isdir(os.path.join(corpus, d))
    )
    if not dirs:
        raise PlaneDepthError(f"{corpus}: no scene directories")
    return dirs


def _read_video(scene_dir):
    return formats.read_video_frames(os.path.join(scene_dir, "frames"))


def _read_gt(scene_dir):
    gt_dir = os.path.join(scene_dir, "gt")
    names = sorted(n for n in os.listdir(gt_dir) if n.endswith(".pfm"))
    if not names:
        raise PlaneDepthError(f"{gt_dir}: no ground-truth PFM files")
    return [formats.read_depth_pfm(os.path.join(gt_dir, n)) for n in names]


def _read_labels(scene_dir, explicit=None):
    if explicit:
        return formats.read_labels(explicit)
    for name in ("labels.stseg", "true_labels.stseg"):
        path = os.path.join(scene_dir, name)
        if os.path.exists(path):
            return formats.read_labels(path)
    raise PlaneDepthError(f"{scene_dir}: no labels.stseg / true_labels.stseg")


def _read_gc(scene_dir, explicit=None):
    path = explicit or os.path.join(scene_dir, "gc.npy")
    if not os.path.exists(path):
        raise PlaneDepthError(f"{path}: missing confidence maps")
    return formats.read_gc_maps(path)


def _scene_features(scene_dir, video, labels, gc_maps, config):
    """Reuse features.csv when it still matches the label map; recompute
    otherwise (e.g. after re-running segment)."""
    path = os.path.join(scene_dir, "features.csv")
    rindex = RegionIndex(labels)
    if os.path.exists(path):
        rows, keys, _ = formats.read_features_csv(path)
        expected = {
            (r, t)
            for r in range(rindex.n_regions)
            for t in range(rindex.n_frames)
            if rindex.slice_count(r, t) > 0
        }
        if set(keys) == expected:
            return rows, keys, rindex
        print(f"{path}: stale (labels changed), recomputing", file=sys.stderr)
    rows, keys, rindex = pl.region_feature_table(
        video, labels, gc_maps, config, rindex=rindex
    )
    return rows, keys, rindex


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args):
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    os.makedirs(args.out, exist_ok=True)
    for s in range(args.scenes):
        if args.family == "layered":
            n_regions = int(rng.integers(3, 9))
            spec = layered_scene_spec(rng, n_regions, width=args.width,
                                      height=args.height, n_frames=args.frames)
        else:
            spec = outdoor_scene_spec(rng, width=args.width,
                                      height=args.height,
                                      n_frames=args.frames,
                                      n_objects=args.objects)
        scene = generate_scene(spec)
        scene_dir = os.path.join(args.out, f"scene_{s:03d}")
        formats.write_video_frames(os.path.join(scene_dir, "frames"),
                                   scene.video)
        gt_dir = os.path.join(scene_dir, "gt")
        os.makedirs(gt_dir, exist_ok=True)
        for t, dm in enumerate(scene.depth_maps):
            formats.write_depth_pfm(formats.frame_path(gt_dir, t, "pfm"), dm)
        formats.write_labels(os.path.join(scene_dir, "true_labels.stseg"),
                             scene.labels)
        formats.write_gc_maps(os.path.join(scene_dir, "gc.npy"),
                              scene.gc_maps)
        formats.write_planes_csv(
            os.path.join(scene_dir, "true_planes.csv"),
            {t: scene.alphas for t in range(spec.n_frames)},
        )
        cfg = pl.PipelineConfig(fu=spec.K.fu, fv=spec.K.fv, u0=spec.K.u0,
                                v0=spec.K.v0, horizon_row=spec.horizon_row)
        cfg.save(os.path.join(scene_dir, "config.txt"))
        print(f"{scene_dir}: {int(scene.labels.max()) + 1} regions, "
              f"{spec.n_frames} frames")
    return 0


def cmd_segment(args):
    config = _load_config(args)
    video = _read_video(args.video)
    flows = pl.compute_forward_flows(video, config)
    labels = segment_video(
        video, flows,
        merge_threshold=config.merge_threshold,
        min_region_size=config.min_region_size,
    )
    out = args.out or os.path.join(args.video, "labels.stseg")
    formats.write_labels(out, labels)
    print(f"{out}: {int(labels.max()) + 1} regions")
    return 0


def cmd_flow(args):
    config = _load_config(args)
    video = _read_video(args.video)
    out_dir = args.out or os.path.join(args.video, "flows")
    os.makedirs(out_dir, exist_ok=True)
    offsets = [int(o) for o in args.offsets.split(",")]
    cache = {}
    count = 0
    for j in range(video.shape[0]):
        for offset in offsets:
            field, _ = pl.flow_mod.flow_to(
                list(video), j, offset, cache=cache,
                pyramid_levels=config.flow_levels,
                iterations=config.flow_iterations,
                smoothness=config.flow_smoothness,
            )
            formats.write_flo(
                os.path.join(out_dir, f"flow_{j:06d}_off{offset}.flo"), field
            )
            count += 1
    print(f"{out_dir}: wrote {count} fields")
    return 0


def cmd_features(args):
    config = _load_config(args)
    video = _read_video(args.video)
    labels = _read_labels(args.video, args.labels)
    gc_maps = _read_gc(args.video, args.gc)
    rows, keys, _ = pl.region_feature_table(video, labels, gc_maps, config)
    out = args.out or os.path.join(args.video, "features.csv")
    formats.write_features_csv(out, rows, keys, feature_names())
    if args.bin:
        formats.write_features_bin(out.replace(".csv", ".bin"), rows, keys,
                                   feature_names())
    print(f"{out}: {rows.shape[0]} region slices x {rows.shape[1]} features")
    return 0


def _corpus_training_tables(args, config):
    tables = []
    for scene_dir in _scene_dirs(args.corpus):
        video = _read_video(scene_dir)
        labels = _read_labels(scene_dir)
        gc_maps = _read_gc(scene_dir)
        gt_maps = _read_gt(scene_dir)
        rows, keys, rindex = _scene_features(scene_dir, video, labels,
                                             gc_maps, config)
        tables.append((scene_dir, video, labels, gt_maps, rows, keys, rindex))
    return tables


def cmd_train_depth(args):
    config = _load_config(args)
    X_parts, y_parts = [], []
    for _, _, _, gt_maps, rows, keys, rindex in _corpus_training_tables(args, config):
        X, y = pl.depth_training_data(rows, keys, gt_maps, rindex)
        X_parts.append(X)
        y_parts.append(y)
    model = pl.train_depth_forest(
        np.vstack(X_parts), np.concatenate(y_parts), config, config.ablation
    )
    forest_mod.save_forest(model, args.out)
    print(f"{args.out}: depth forest on {sum(len(y) for y in y_parts)} slices "
          f"(ablation {config.ablation})")
    return 0


def cmd_train_occl(args):
    config = _load_config(args)
    graphs, gt_lists = [], []
    for _, video, labels, gt_maps, rows, keys, rindex in \
            _corpus_training_tables(args, config):
        graphs.append(pl.occlusion_graph(video, labels, rows, keys, config,
                                         rindex))
        gt_lists.append(gt_maps)
    model = pl.train_occlusion_forest(graphs, gt_lists, config)
    forest_mod.save_forest(model, args.out)
    n = sum(len(g.edgelets) for g in graphs)
    print(f"{args.out}: occlusion forest on {n} edgelets")
    return 0


def cmd_train_gc(args):
    from .features import gc_training_rows, train_geometric_context

    config = _load_config(args)
    rows_all, classes_all = [], []
    for scene_dir in _scene_dirs(args.corpus):
        video = _read_video(scene_dir)
        labels = _read_labels(scene_dir)
        gc_maps = _read_gc(scene_dir)
        rindex = RegionIndex(labels)
        K = config.camera(video.shape[2], video.shape[1])
        rows, keys = gc_training_rows(video, rindex, config.horizon(K))
        for row, (r, t) in zip(rows, keys):
            ys, xs = rindex.pixels(r, t)
            cls = int(np.argmax(gc_maps[t][ys, xs].mean(axis=0)))
            rows_all.append(row)
            classes_all.append(cls)
    model = train_geometric_context(np.asarray(rows_all), classes_all)
    forest_mod.save_forest(model, args.out)
    print(f"{args.out}: layout classifier on {len(rows_all)} region slices")
    return 0


def cmd_occl(args):
    config = _load_config(args)
    if args.window is not None:
        config.occlusion_window = args.window
    video = _read_video(args.video)
    labels = _read_labels(args.video, args.labels)
    gc_maps = _read_gc(args.video, args.gc)
    rows, keys, rindex = _scene_features(args.video, video, labels, gc_maps,
                                         config)
    graph = pl.occlusion_graph(video, labels, rows, keys, config, rindex)
    model = forest_mod.load_forest(args.model)
    pl.smoothed_gates(graph, model, config)
    out = args.out or os.path.join(args.video, "edgelets.jsonl")
    occl_mod.write_edgelets_jsonl(out, graph)
    print(f"{out}: {len(graph.edgelets)} edgelets")
    return 0


def cmd_infer(args):
    config = _load_config(args)
    if args.window is not None:
        config.depth_window = args.window
    video = _read_video(args.video)
    labels = _read_labels(args.video, args.labels)
    K = config.camera(video.shape[2], video.shape[1])
    rindex = RegionIndex(labels)

    if args.oracle_unaries:
        gt_maps = _read_gt(args.video)
        unary_for_frame = pl.unary_fn_from_depth_maps(gt_maps)
    else:
        if not args.depth_model:
            raise PlaneDepthError(
                "infer needs --depth-model (or --oracle-unaries)"
            )
        gc_maps = _read_gc(args.video, args.gc)
        rows, keys, rindex = _scene_features(args.video, video, labels,
                                             gc_maps, config)
        model = forest_mod.load_forest(args.depth_model)
        unary = pl.predict_unary_depths(model, rows, keys, config.ablation)
        unary_for_frame = pl.unary_fn_from_predictions(unary)

    if args.oracle_gates:
        gt_maps = _read_gt(args.video)
        graph = occl_mod.build_graph(labels)
        occ = occl_mod.label_edgelets_from_depth(
            graph, gt_maps, gap=config.occlusion_depth_gap
        )
        gates = {
            (e.i, e.j, e.frame): 0.0 if bool(lab == 0) else 1.0
            for e, lab in zip(graph.edgelets, occ)
        }
    elif args.edgelets:
        gates = {
            (rec["i"], rec["j"], rec["frame"]): rec["p_non_occl"]
            for rec in occl_mod.read_edgelets_jsonl(args.edgelets)
        }
    else:
        gates = {}  # every boundary treated as non-occluding

    maps, alphas_by_frame, _ = pl.solve_video(
        labels, K, unary_for_frame, gates, config
    )
    out_dir = args.out or os.path.join(args.video, "pred")
    os.makedirs(out_dir, exist_ok=True)
    for t, dm in enumerate(maps):
        formats.write_depth_pfm(formats.frame_path(out_dir, t, "pfm"), dm)
    formats.write_planes_csv(
        os.path.join(out_dir, "planes.csv"),
        {t: {r: a for r, a in planes.items()}
         for t, planes in enumerate(alphas_by_frame)},
    )
    print(f"{out_dir}: {len(maps)} depth maps")
    return 0


def _read_depth_dir(path):
    names = sorted(n for n in os.listdir(path) if n.endswith(".pfm"))
    if not names:
        raise PlaneDepthError(f"{path}: no PFM depth maps")
    return [formats.read_depth_pfm(os.path.join(path, n)) for n in names]


def cmd_eval(args):
    preds = _read_depth_dir(args.pred)
    gts = _read_depth_dir(args.gt)
    if len(preds) != len(gts):
        raise PlaneDepthError(
            f"{len(preds)} predictions vs {len(gts)} ground-truth maps"
        )
    class_maps = None
    if args.classes:
        gc = formats.read_gc_maps(args.classes)
        class_maps = list(gc)
    report = evaluate(preds, gts, class_maps,
                      log_base=np.e if args.log_base == "e" else 10.0)
    print(report.format_table())
    if args.json:
        formats.atomic_write_bytes(args.json, report.to_json().encode())
    return 0


def cmd_crossval(args):
    config = _load_config(args)
    scenes = []
    from .evaluate import FeaturizedVideo

    for scene_dir in _scene_dirs(args.corpus):
        video = _read_video(scene_dir)
        labels = _read_labels(scene_dir)
        gc_maps = _read_gc(scene_dir)
        gt_maps = _read_gt(scene_dir)
        rows, keys, rindex = _scene_features(scene_dir, video, labels,
                                             gc_maps, config)
        scenes.append(FeaturizedVideo(rows, keys, rindex, labels, gt_maps,
                                      gc_maps, video))
    report = crossval(scenes, config, k=args.folds,
                      ablation=config.ablation, use_mrf=config.use_mrf)
    print(report.format_table())
    if args.json:
        formats.atomic_write_bytes(args.json, report.to_json().encode())
    return 0


def cmd_project_lidar(args):
    config = _load_config(args)
    points = (
        formats.read_points_bin(args.cloud)
        if args.cloud.endswith(".bin")
        else formats.read_points_xyz(args.cloud)
    )
    scan = LidarScan(points)
    extr = Extrinsics.identity()
    if args.extrinsics:
        values = np.loadtxt(args.extrinsics).reshape(3, 4)
        extr = Extrinsics(values[:, :3], values[:, 3])
    K = config.camera(args.width, args.height)
    proj = project_lidar(scan.points, extr, K, args.width, args.height)
    formats.write_points_xyz(args.out, proj)
    print(f"{args.out}: {proj.shape[0]} of {points.shape[0]} points in frame")
    return 0


def cmd_render_preview(args):
    def render_one(src, dst):
        dm = (
            formats.read_depth_png16(src)
            if src.endswith(".png")
            else formats.read_depth_pfm(src)
        )
        formats.write_depth_preview(dst, dm)

    if os.path.isdir(args.depth):
        os.makedirs(args.out, exist_ok=True)
        names = sorted(
            n for n in os.listdir(args.depth) if n.endswith((".pfm", ".png"))
        )
        if not names:
            raise PlaneDepthError(f"{args.depth}: no depth maps")
        for n in names:
            render_one(
                os.path.join(args.depth, n),
                os.path.join(args.out, os.path.splitext(n)[0] + "_preview.png"),
            )
        print(f"{args.out}: {len(names)} previews")
    else:
        render_one(args.depth, args.out)
        print(args.out)
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="planedepth",
        description="Monocular video depth estimation with an "
                    "occlusion-gated piecewise-planar MRF.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, window=False):
        p.add_argument("--config", help="pipeline config file (key = value)")
        p.add_argument("--seed", type=int)
        p.add_argument("--ablation", choices=["ALL", "App+Flow", "Appearance"])
        p.add_argument("--lambda-conn", dest="lambda_conn", type=float)
        p.add_argument("--lambda-cop", dest="lambda_cop", type=float)
        if window:
            p.add_argument("--window", type=int)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=5)
    p.add_argument("--family", choices=["outdoor", "layered"],
                   default="outdoor")
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--height", type=int, default=72)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--objects", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="spatio-temporal segmentation")
    p.add_argument("--video", required=True)
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("flow", help="dense optical flow fields")
    p.add_argument("--video", required=True)
    p.add_argument("--out")
    p.add_argument("--offsets", default="1,3,5")
    common(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("features", help="region feature table")
    p.add_argument("--video", required=True)
    p.add_argument("--labels")
    p.add_argument("--gc")
    p.add_argument("--out")
    p.add_argument("--bin", action="store_true",
                   help="also write float32 binary + JSON sidecar")
    common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train-depth", help="train the depth regressor")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_train_depth)

    p = sub.add_parser("train-occl", help="train the occlusion classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_train_occl)

    p = sub.add_parser("train-gc", help="train the layout-class baseline")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_train_gc)

    p = sub.add_parser("occl", help="classify and smooth occlusion boundaries")
    p.add_argument("--video", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--labels")
    p.add_argument("--gc")
    p.add_argument("--out")
    common(p, window=True)
    p.set_defaults(func=cmd_occl)

    p = sub.add_parser("infer", help="solve per-frame planes and render depth")
    p.add_argument("--video", required=True)
    p.add_argument("--depth-model", dest="depth_model")
    p.add_argument("--labels")
    p.add_argument("--gc")
    p.add_argument("--edgelets", help="edgelets.jsonl with gate probabilities")
    p.add_argument("--oracle-unaries", action="store_true",
                   help="use ground-truth depths as unaries")
    p.add_argument("--oracle-gates", action="store_true",
                   help="gates from ground-truth depth gaps")
    p.add_argument("--out")
    common(p, window=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="depth error metrics")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", help="gc.npy for a per-class breakdown")
    p.add_argument("--json", help="also write the report as JSON")
    p.add_argument("--log-base", choices=["10", "e"], default="10")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crossval", help="k-fold cross-validation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--json")
    common(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("project-lidar", help="project a point cloud to pixels")
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--extrinsics", help="3x4 [R|t] text file, sensor to camera")
    common(p)
    p.set_defaults(func=cmd_project_lidar)

    p = sub.add_parser("render-preview", help="color-mapped depth preview")
    p.add_argument("--depth", required=True, help="PFM/PNG16 file or directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_preview)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PlaneDepthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
