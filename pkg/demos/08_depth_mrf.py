#!/usr/bin/env python3
"""The piecewise-planar MRF.  Per-region unary depths (here: ground truth
corrupted by 10% noise) feed a quadratic energy whose smoothness terms act
only across non-occluding boundaries; L-BFGS recovers the planes.  With
exact unaries and oracle gates, recovery is exact; with noise, the gated
coupling beats independent per-region fits."""

import numpy as np

from planedepth import DepthMap, evaluate, generate_scene, layered_scene_spec
from planedepth.pipeline import PipelineConfig, solve_video, unary_fn_from_depth_maps

rng = np.random.default_rng(5)
scene = generate_scene(layered_scene_spec(rng, 6, n_frames=4))
gates = scene.gates()
n_open = sum(1 for y in gates.values() if y == 1.0)
print(f"{scene.labels.max() + 1} regions, "
      f"{n_open} non-occluding of {len(gates)} boundaries (frame count folded)")

config = PipelineConfig(depth_window=1)

# exact unaries: recovery to solver precision
maps, _, solutions = solve_video(
    scene.labels, scene.K, unary_fn_from_depth_maps(scene.depth_maps),
    gates, config,
)
rel = max(
    float((np.abs(m.values - dm.values) / dm.values).max())
    for m, dm in zip(maps, scene.depth_maps)
)
print(f"oracle unaries: worst per-pixel relative error {rel:.2e}")
energies = solutions[0].energies
print(f"energy sequence ({len(energies)} accepted steps) is non-increasing:"
      f" {np.all(np.diff(energies) <= 0)}; final {energies[-1]:.3e}")

# noisy unaries: the gated MRF vs independent fits
noisy = [DepthMap(dm.values * rng.lognormal(0, 0.1, dm.values.shape))
         for dm in scene.depth_maps]
unary_fn = unary_fn_from_depth_maps(noisy)
mrf_maps, _, _ = solve_video(scene.labels, scene.K, unary_fn, gates, config)
solo_maps, _, _ = solve_video(
    scene.labels, scene.K, unary_fn, gates,
    PipelineConfig(depth_window=1, use_mrf=False),
)
mrf_rel = evaluate(mrf_maps, scene.depth_maps).rel_error
solo_rel = evaluate(solo_maps, scene.depth_maps).rel_error
print(f"\n10% noisy unaries:")
print(f"  independent per-region fits: rel error {solo_rel:.4f}")
print(f"  occlusion-gated MRF:         rel error {mrf_rel:.4f}")
