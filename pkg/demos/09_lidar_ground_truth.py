#!/usr/bin/env python3
"""Ground truth from a laser scanner: sensor points project into the
camera (keeping ray distance as depth), and per-region averages over a
centered 5-frame window become the training depth maps.  Regions no beam
hit stay invalid."""

import numpy as np

from planedepth import Extrinsics, generate_scene, layered_scene_spec, project_lidar, segment_ground_truth
from planedepth.lidar import depth_map_to_points

rng = np.random.default_rng(6)
scene = generate_scene(layered_scene_spec(rng, 4, n_frames=3))
h, w = scene.labels.shape[1:]

# simulate a sparse scanner by sampling the true depth maps
extr = Extrinsics.identity()
projections = []
for dm in scene.depth_maps:
    pts = depth_map_to_points(dm, scene.K, extr, n_points=800,
                              rng=np.random.default_rng(60))
    projections.append(project_lidar(pts, extr, scene.K, w, h))
print(f"{projections[0].shape[0]} hits per frame on a {w}x{h} image")

gt_maps = segment_ground_truth(projections, scene.labels, window=5)
for r in range(scene.labels.max() + 1):
    mask = scene.labels[0] == r
    true = scene.depth_maps[0].values[mask].mean()
    got = gt_maps[0].values[mask].mean()
    print(f"region {r}: true mean {true:6.2f} m, "
          f"segment-averaged {got:6.2f} m")

coverage = np.mean([m.valid.mean() for m in gt_maps])
print(f"valid-pixel coverage: {coverage:.1%}")
