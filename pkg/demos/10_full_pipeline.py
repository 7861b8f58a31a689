#!/usr/bin/env python3
"""The whole learned pipeline on a small synthetic corpus: segment the
videos, featurize, train the depth and occlusion forests, infer with the
gated MRF, and score against ground truth.  Mirrors what the CLI chain
synth -> segment -> features -> train-depth -> train-occl -> occl ->
infer -> eval does from files."""

import numpy as np

from planedepth import evaluate, generate_scene, outdoor_scene_spec, segment_video
from planedepth.pipeline import (
    PipelineConfig,
    compute_forward_flows,
    depth_training_data,
    infer_video,
    region_feature_table,
    train_depth_forest,
    train_occlusion_forest,
    occlusion_graph,
)

rng = np.random.default_rng(8)
config = PipelineConfig(flow_iterations=40, flow_levels=2, n_trees=40,
                        min_samples_leaf=2, seed=0)

print("generating and segmenting 3 scenes ...")
scenes, tables = [], []
for k in range(3):
    scene = generate_scene(outdoor_scene_spec(rng, width=80, height=60,
                                              n_frames=5, n_objects=3))
    flows = compute_forward_flows(scene.video, config)
    labels = segment_video(scene.video, flows,
                           merge_threshold=config.merge_threshold,
                           min_region_size=24)
    rows, keys, rindex = region_feature_table(
        scene.video, labels, scene.gc_maps, config
    )
    scenes.append((scene, labels))
    tables.append((rows, keys, rindex))
    print(f"  scene {k}: {labels.max() + 1} segmented regions")

print("training forests ...")
X_parts, y_parts, graphs, gt_lists = [], [], [], []
for (scene, labels), (rows, keys, rindex) in zip(scenes, tables):
    X, y = depth_training_data(rows, keys, scene.depth_maps, rindex)
    X_parts.append(X)
    y_parts.append(y)
    graphs.append(occlusion_graph(scene.video, labels, rows, keys, config,
                                  rindex))
    gt_lists.append(scene.depth_maps)
depth_model = train_depth_forest(np.vstack(X_parts),
                                 np.concatenate(y_parts), config)
occl_model = train_occlusion_forest(graphs, gt_lists, config)

print("inferring depth ...")
for k, (scene, labels) in enumerate(scenes):
    maps, _, _, _ = infer_video(scene.video, labels, scene.gc_maps,
                                depth_model, occl_model, config)
    report = evaluate(maps, scene.depth_maps, list(scene.gc_maps))
    print(f"\nscene {k}:")
    print(report.format_table())
