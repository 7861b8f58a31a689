#!/usr/bin/env python3
"""Occlusion boundaries: edgelets between adjacent regions are classified
as occluding vs non-occluding from region-difference features, smoothed
over connected edgelets, and averaged along their temporal track.  The
final non-occlusion probability is the gate y_ij that lets depth smoothness
act across a boundary (y=1) or not (y=0)."""

import numpy as np

from planedepth import generate_scene, layered_scene_spec
from planedepth.pipeline import (
    PipelineConfig,
    occlusion_graph,
    region_feature_table,
    smoothed_gates,
    train_occlusion_forest,
)

rng = np.random.default_rng(4)
config = PipelineConfig(flow_iterations=30, flow_levels=2, n_trees=40)

# train on a few scenes whose occlusion labels come from true depth gaps
train_graphs, train_gts = [], []
for _ in range(4):
    scene = generate_scene(layered_scene_spec(rng, 5, n_frames=3))
    rows, keys, rindex = region_feature_table(
        scene.video, scene.labels, scene.gc_maps, config
    )
    train_graphs.append(occlusion_graph(
        scene.video, scene.labels, rows, keys, config, rindex
    ))
    train_gts.append(scene.depth_maps)
model = train_occlusion_forest(train_graphs, train_gts, config)
print(f"trained on {sum(len(g.edgelets) for g in train_graphs)} edgelets")

# held-out scene: compare predicted gates with the ground truth
scene = generate_scene(layered_scene_spec(rng, 6, n_frames=3))
rows, keys, rindex = region_feature_table(
    scene.video, scene.labels, scene.gc_maps, config
)
graph = occlusion_graph(scene.video, scene.labels, rows, keys, config, rindex)
gates = smoothed_gates(graph, model, config)

unaries = {
    (e.i, e.j, e.frame): e.unary for e in graph.edgelets
}
print("\nboundary   truth           unary   gate y_ij")
correct = 0
frame0 = [(k, v) for k, v in sorted(gates.items()) if k[2] == 0]
for (i, j, t), y in frame0:
    occluding = scene.occluding[(i, j, t)]
    label = "occluding" if occluding else "non-occluding"
    hit = (y < 0.5) == occluding
    correct += hit
    print(f"({i}, {j})     {label:<15} {unaries[(i, j, t)]:.3f}   "
          f"{y:.3f}  {'ok' if hit else 'MISS'}")
print(f"\n{correct}/{len(frame0)} boundaries gated correctly")
print("(the damped pairwise coupling nudges each gate toward its chain")
print(" neighbors without letting them override a confident unary)")
