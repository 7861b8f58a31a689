import numpy as np
import pytest

from planedepth.evaluate import evaluate
from planedepth.pipeline import (
    PipelineConfig,
    build_frame_problem,
    depth_training_data,
    predict_unary_depths,
    region_feature_table,
    render_unary_maps,
    solve_video,
    train_depth_forest,
    unary_fn_from_depth_maps,
)
from planedepth.segmentation import RegionIndex
from planedepth.synth import generate_scene, layered_scene_spec, outdoor_scene_spec


def oracle_config(**kwargs):
    defaults = dict(use_mrf=True, depth_window=5, seed=0)
    defaults.update(kwargs)
    return PipelineConfig(**defaults)


class TestConfig:
    def test_keyvalue_round_trip(self, tmp_path):
        config = PipelineConfig(fu=500.0, fv=480.0, lambda_cop=0.25,
                                ablation="App+Flow", use_mrf=False)
        p = str(tmp_path / "config.txt")
        config.save(p)
        assert PipelineConfig.load(p) == config

    def test_none_camera_defaults(self):
        K = PipelineConfig().camera(64, 48)
        assert K.fu == 64.0
        assert K.v0 == pytest.approx(23.5)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig.from_mapping({"bogus": "1"})


class TestFeatureTable:
    def test_covers_all_slices(self):
        rng = np.random.default_rng(0)
        scene = generate_scene(outdoor_scene_spec(rng, width=48, height=36,
                                                  n_frames=3, n_objects=2))
        config = PipelineConfig(flow_iterations=20, flow_levels=2)
        rows, keys, rindex = region_feature_table(
            scene.video, scene.labels, scene.gc_maps, config
        )
        assert rows.shape[1] == 133
        expected_keys = {
            (r, t)
            for r in range(rindex.n_regions)
            for t in range(rindex.n_frames)
            if rindex.slice_count(r, t) > 0
        }
        assert set(keys) == expected_keys
        assert np.all(np.isfinite(rows))


class TestOraclePath:
    def test_exact_recovery_layered_scene(self):
        rng = np.random.default_rng(1)
        scene = generate_scene(layered_scene_spec(rng, 5, n_frames=4))
        config = oracle_config()
        maps, alphas, solutions = solve_video(
            scene.labels, scene.K,
            unary_fn_from_depth_maps(scene.depth_maps),
            scene.gates(), config,
        )
        for got, want in zip(maps, scene.depth_maps):
            rel = np.abs(got.values - want.values) / want.values
            assert rel.max() < 1e-3
        for sol in solutions:
            assert np.all(np.diff(sol.energies) <= 0)

    def test_lambda_sweep_recovery_is_weight_independent(self):
        # with oracle unaries and gates, the truth zeroes every term, so
        # recovery must hold across the whole weight grid
        rng = np.random.default_rng(6)
        scene = generate_scene(layered_scene_spec(rng, 4, n_frames=2))
        for lam_conn in (0.25, 1.0, 4.0):
            for lam_cop in (0.0, 0.5, 2.0):
                config = oracle_config(depth_window=1, lambda_conn=lam_conn,
                                       lambda_cop=lam_cop)
                maps, _, _ = solve_video(
                    scene.labels, scene.K,
                    unary_fn_from_depth_maps(scene.depth_maps),
                    scene.gates(), config,
                )
                for got, want in zip(maps, scene.depth_maps):
                    rel = np.abs(got.values - want.values) / want.values
                    assert rel.max() < 1e-3

    def test_open_gates_couple_split_regions(self):
        rng = np.random.default_rng(2)
        scene = generate_scene(layered_scene_spec(rng, 4, n_frames=2))
        split_pairs = [
            (i, j) for (i, j, t), occ in scene.occluding.items()
            if not occ and t == 0
        ]
        assert split_pairs
        config = oracle_config()
        _, alphas, _ = solve_video(
            scene.labels, scene.K,
            unary_fn_from_depth_maps(scene.depth_maps),
            scene.gates(), config,
        )
        for i, j in split_pairs:
            assert np.allclose(alphas[0][i], alphas[0][j], atol=1e-4)


class TestBuildFrameProblem:
    def test_region_ids_and_pairs(self):
        rng = np.random.default_rng(3)
        scene = generate_scene(layered_scene_spec(rng, 4, n_frames=1))
        rindex = RegionIndex(scene.labels)
        config = oracle_config()
        problem, region_ids = build_frame_problem(
            scene.labels[0], 0, rindex, scene.K,
            lambda r, ys, xs: scene.depth_maps[0].values[ys, xs],
            scene.gates(), config,
        )
        assert region_ids == list(range(4))
        assert len(problem.regions) == 4
        assert len(problem.pairs) == 3  # vertical strips: consecutive pairs
        for p in problem.pairs:
            assert p.boundary_rays.shape[0] >= 1

    def test_sample_cap(self):
        rng = np.random.default_rng(4)
        scene = generate_scene(layered_scene_spec(rng, 3, n_frames=1))
        config = oracle_config(max_samples_per_region=50)
        problem, _ = build_frame_problem(
            scene.labels[0], 0, RegionIndex(scene.labels), scene.K,
            lambda r, ys, xs: scene.depth_maps[0].values[ys, xs],
            scene.gates(), config,
        )
        for reg in problem.regions:
            assert reg.rays.shape[0] <= 50


class TestLearnedUnaries:
    def test_depth_forest_self_consistency(self):
        rng = np.random.default_rng(5)
        scene = generate_scene(outdoor_scene_spec(rng, width=48, height=36,
                                                  n_frames=3, n_objects=2))
        config = PipelineConfig(n_trees=10, min_samples_leaf=1,
                                flow_iterations=20, flow_levels=2, seed=1)
        rows, keys, rindex = region_feature_table(
            scene.video, scene.labels, scene.gc_maps, config
        )
        X, y = depth_training_data(rows, keys, scene.depth_maps, rindex)
        model = train_depth_forest(X, y, config)
        unary = predict_unary_depths(model, rows, keys)
        # trained and predicted on the same slices: log predictions track
        # the region-mean targets closely
        from planedepth.pipeline import slice_mean_depths

        targets = slice_mean_depths(scene.depth_maps, rindex)
        errs = [
            abs(np.log10(unary[key]) - np.log10(targets[key]))
            for key in targets
        ]
        assert np.mean(errs) < 0.05
        maps = render_unary_maps(scene.labels, unary)
        report = evaluate(maps, scene.depth_maps)
        # region-constant depth on a sloping ground plane is inherently
        # coarse per pixel; just pin a regression bound
        assert report.rel_error < 1.0

    def test_unary_maps_region_constant(self):
        labels = np.zeros((1, 4, 6), dtype=np.int32)
        labels[0, :, 3:] = 1
        maps = render_unary_maps(labels, {(0, 0): 5.0, (1, 0): 9.0})
        assert np.all(maps[0].values[:, :3] == 5.0)
        assert np.all(maps[0].values[:, 3:] == 9.0)
        assert maps[0].valid.all()

    def test_unary_maps_missing_slice_invalid(self):
        labels = np.zeros((1, 2, 4), dtype=np.int32)
        labels[0, :, 2:] = 1
        maps = render_unary_maps(labels, {(0, 0): 5.0})
        assert maps[0].valid[0, 0]
        assert not maps[0].valid[0, 3]
