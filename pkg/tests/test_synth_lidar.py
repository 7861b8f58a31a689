import numpy as np
import pytest

from planedepth.geometry import (
    D_MAX,
    CameraIntrinsics,
    DepthMap,
    pixel_ray,
    plane_depth,
    render_depth,
)
from planedepth.lidar import (
    Extrinsics,
    LidarScan,
    depth_map_to_points,
    project_lidar,
    segment_ground_truth,
)
from planedepth.synth import (
    SceneSpec,
    boundary_median_gaps,
    generate_scene,
    layered_scene_spec,
    outdoor_scene_spec,
)

K_VGA = CameraIntrinsics(500.0, 500.0, 320.0, 240.0)


def single_plane_spec(depth=10.0, n_frames=3):
    layout = np.zeros((24, 32), dtype=np.int32)
    return SceneSpec(
        width=32, height=24, n_frames=n_frames,
        K=CameraIntrinsics.default(32, 24), layout=layout,
        alphas={0: np.array([0.0, 0.0, 1.0 / depth])},
        classes={0: 2}, colors={0: np.array([120.0, 120.0, 120.0])},
        seed=5,
    )


class TestGenerateScene:
    def test_single_fronto_plane(self):
        scene = generate_scene(single_plane_spec())
        center = scene.depth_maps[0].values[12, 16]
        assert center == pytest.approx(10.0, abs=0.05)
        assert scene.occluding == {}  # single region: no edgelets
        assert scene.video.shape == (3, 24, 32, 3)
        assert np.all(scene.labels == 0)
        assert np.allclose(scene.gc_maps[..., 2], 1.0)

    def test_ground_wall_occlusion_labels(self):
        layout = np.zeros((40, 40), dtype=np.int32)
        layout[:20] = 0  # wall, far
        layout[20:] = 1  # closer fronto plane
        spec = SceneSpec(
            width=40, height=40, n_frames=2,
            K=CameraIntrinsics.default(40, 40), layout=layout,
            alphas={0: np.array([0, 0, 1 / 30.0]), 1: np.array([0, 0, 1 / 5.0])},
            classes={0: 2, 1: 1},
            colors={0: np.array([200.0, 50, 50]), 1: np.array([50, 200.0, 50])},
            seed=1,
        )
        scene = generate_scene(spec)
        assert scene.occluding[(0, 1, 0)] is True
        assert scene.gates()[(0, 1, 0)] == 0.0

    def test_slanted_ground_depth_increases_up_the_image(self):
        # ground-style plane: depth grows toward the horizon (smaller v)
        layout = np.zeros((40, 40), dtype=np.int32)
        K = CameraIntrinsics.default(40, 40)
        spec = SceneSpec(
            width=40, height=40, n_frames=1, K=K, layout=layout,
            alphas={0: np.array([0.0, 0.05, 0.05])},
            classes={0: 1}, colors={0: np.array([90.0, 90, 90])}, seed=2,
        )
        scene = generate_scene(spec)
        col = scene.depth_maps[0].values[:, 20]
        assert np.all(np.diff(col) < 0)  # larger v (down) = closer
        r = pixel_ray(K, 20, 35)
        assert col[35] == pytest.approx(
            plane_depth(r, spec.alphas[0]), abs=1e-9
        )

    def test_scroll_moves_texture(self):
        spec = single_plane_spec(n_frames=2)
        spec.scrolls = {0: (3.0, 0.0)}
        scene = generate_scene(spec)
        a = scene.video[0].astype(np.int64)
        b = scene.video[1].astype(np.int64)
        assert np.array_equal(np.roll(a, 3, axis=1), b)

    def test_deterministic(self):
        a = generate_scene(single_plane_spec())
        b = generate_scene(single_plane_spec())
        assert np.array_equal(a.video, b.video)


class TestLayeredFamily:
    def test_properties_hold_across_seeds(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            n_regions = int(rng.integers(3, 9))
            spec = layered_scene_spec(rng, n_regions)
            scene = generate_scene(spec)
            assert int(scene.labels.max()) + 1 == n_regions
            # at least one non-occluding pair (a split plane), and every
            # non-occluding pair really is coplanar
            non_occl = [k for k, v in scene.occluding.items() if not v]
            assert non_occl
            for i, j, _ in non_occl:
                assert np.allclose(scene.alphas[i], scene.alphas[j])
            # no depth clamping: true planes must explain every pixel
            for dm in scene.depth_maps:
                assert dm.values.max() < D_MAX - 1e-6

    def test_gap_margins(self):
        rng = np.random.default_rng(1)
        spec = layered_scene_spec(rng, 6)
        scene = generate_scene(spec)
        gaps = boundary_median_gaps(spec.layout, scene.depth_maps[0])
        for (i, j), gap in gaps.items():
            if np.allclose(scene.alphas[i], scene.alphas[j]):
                assert gap < 1.0
            else:
                assert gap > 2.5


class TestSceneInvariantsFuzz:
    def test_downstream_contracts_hold(self):
        # every generated scene must satisfy the input invariants of the
        # modules that consume it
        rng = np.random.default_rng(99)
        specs = []
        for _ in range(5):
            specs.append(layered_scene_spec(rng, int(rng.integers(3, 9)),
                                            n_frames=int(rng.integers(1, 5))))
            specs.append(outdoor_scene_spec(rng, width=48, height=36,
                                            n_frames=int(rng.integers(1, 5)),
                                            n_objects=int(rng.integers(1, 4))))
        for spec in specs:
            scene = generate_scene(spec)
            t, h, w = scene.labels.shape
            assert scene.video.shape == (t, h, w, 3)
            assert scene.video.dtype == np.uint8
            ids = np.unique(scene.labels)
            assert np.array_equal(ids, np.arange(ids.size))
            for dm in scene.depth_maps:
                assert dm.valid.all()
                assert np.all(dm.values > 0)
                assert np.all(dm.values <= D_MAX)
            gc = scene.gc_maps
            assert np.all(gc >= 0) and np.all(gc <= 1)
            assert np.all(gc.sum(axis=-1) <= 1 + 1e-6)
            for (i, j, _), _ in scene.occluding.items():
                assert i < j < ids.size
            for gate in scene.gates().values():
                assert gate in (0.0, 1.0)


class TestOutdoorFamily:
    def test_structure(self):
        rng = np.random.default_rng(2)
        spec = outdoor_scene_spec(rng, n_objects=3, seed=11)
        scene = generate_scene(spec)
        classes_present = {spec.classes[r] for r in spec.classes}
        assert 0 in classes_present and 1 in classes_present
        assert scene.gc_maps.sum(axis=-1).max() == pytest.approx(1.0)
        # sky region renders at the far plane
        sky = [r for r, c in spec.classes.items() if c == 0][0]
        sky_depth = scene.depth_maps[0].values[scene.labels[0] == sky]
        assert sky_depth.min() > 0.9 * D_MAX

    def test_movable_objects_scroll(self):
        rng = np.random.default_rng(3)
        spec = outdoor_scene_spec(rng, n_objects=3, seed=12)
        movable = [r for r, c in spec.classes.items() if c == 4]
        for r in movable:
            assert spec.scrolls[r][0] > 0


class TestExtrinsics:
    def test_identity(self):
        e = Extrinsics.identity()
        pts = np.array([[1.0, 2.0, 3.0]])
        assert np.array_equal(e.apply(pts), pts)

    def test_inverse_round_trip(self):
        theta = 0.3
        R = np.array(
            [[np.cos(theta), -np.sin(theta), 0],
             [np.sin(theta), np.cos(theta), 0],
             [0, 0, 1.0]]
        )
        e = Extrinsics(R, np.array([0.5, -1.0, 2.0]))
        pts = np.random.default_rng(4).uniform(-5, 5, (20, 3))
        assert np.allclose(e.inverse_apply(e.apply(pts)), pts, atol=1e-12)

    def test_invalid_rotation(self):
        with pytest.raises(ValueError):
            Extrinsics(np.eye(3) * 2.0, np.zeros(3))


class TestProjectLidar:
    def test_on_axis_point(self):
        out = project_lidar(np.array([[0.0, 0.0, 10.0]]),
                            Extrinsics.identity(), K_VGA, 640, 480)
        assert out.shape == (1, 3)
        assert np.allclose(out[0], [320.0, 240.0, 10.0])

    def test_off_axis_ray_distance(self):
        out = project_lidar(np.array([[1.0, 0.0, 10.0]]),
                            Extrinsics.identity(), K_VGA, 640, 480)
        assert np.allclose(out[0], [370.0, 240.0, np.sqrt(101.0)])

    def test_behind_camera_dropped(self):
        out = project_lidar(np.array([[0.0, 0.0, -5.0]]),
                            Extrinsics.identity(), K_VGA, 640, 480)
        assert out.shape == (0, 3)

    def test_out_of_frame_dropped(self):
        out = project_lidar(np.array([[50.0, 0.0, 1.0]]),
                            Extrinsics.identity(), K_VGA, 640, 480)
        assert out.shape == (0, 3)


class TestLidarScan:
    def test_range_filter(self):
        scan = LidarScan(np.array([[0, 0, 50.0], [0, 0, 90.0]]))
        assert scan.points.shape == (1, 3)


class TestSegmentGroundTruth:
    def test_all_hits_one_region(self):
        labels = np.zeros((1, 4, 4), dtype=np.int32)
        proj = [np.array([[1.0, 1.0, 10.0], [2.0, 2.0, 10.0]])]
        maps = segment_ground_truth(proj, labels)
        assert np.allclose(maps[0].values, 10.0)
        assert maps[0].valid.all()

    def test_region_without_hits_invalid(self):
        labels = np.zeros((1, 4, 4), dtype=np.int32)
        labels[0, :, 2:] = 1
        proj = [np.array([[0.0, 0.0, 8.0]])]
        maps = segment_ground_truth(proj, labels)
        assert maps[0].valid[0, 0]
        assert not maps[0].valid[0, 3]

    def test_mean_of_mixed_hits(self):
        labels = np.zeros((1, 2, 2), dtype=np.int32)
        proj = [np.array([[0.0, 0.0, 5.0], [1.0, 0.0, 5.0], [0.0, 1.0, 20.0]])]
        maps = segment_ground_truth(proj, labels)
        assert np.allclose(maps[0].values, 10.0)

    def test_window_pools_frames(self):
        labels = np.zeros((3, 2, 2), dtype=np.int32)
        proj = [
            np.array([[0.0, 0.0, 6.0]]),
            np.zeros((0, 3)),
            np.array([[0.0, 0.0, 12.0]]),
        ]
        maps = segment_ground_truth(proj, labels, window=5)
        assert np.allclose(maps[1].values, 9.0)

    def test_window_one_uses_single_frame(self):
        labels = np.zeros((2, 2, 2), dtype=np.int32)
        proj = [np.array([[0.0, 0.0, 6.0]]), np.array([[0.0, 0.0, 12.0]])]
        maps = segment_ground_truth(proj, labels, window=1)
        assert np.allclose(maps[0].values, 6.0)
        assert np.allclose(maps[1].values, 12.0)


class TestDepthMapRoundTrip:
    def test_sample_and_reproject(self):
        # depth -> cloud -> projection reproduces the depths at hit pixels
        layout = np.zeros((30, 40), dtype=np.int32)
        K = CameraIntrinsics.default(40, 30)
        dm = render_depth(layout, {0: np.array([0.01, -0.005, 0.08])}, K)
        pts = depth_map_to_points(dm, K, n_points=500,
                                  rng=np.random.default_rng(5))
        proj = project_lidar(pts, Extrinsics.identity(), K, 40, 30)
        assert proj.shape[0] == 500
        for u, v, d in proj[:50]:
            assert d == pytest.approx(dm.values[int(round(v)), int(round(u))],
                                      rel=1e-6)

    def test_extrinsics_round_trip(self):
        dm = DepthMap(np.full((10, 10), 7.0))
        K = CameraIntrinsics.default(10, 10)
        theta = -0.2
        R = np.array(
            [[1, 0, 0],
             [0, np.cos(theta), -np.sin(theta)],
             [0, np.sin(theta), np.cos(theta)]]
        )
        extr = Extrinsics(R, np.array([0.1, 0.2, -0.3]))
        pts = depth_map_to_points(dm, K, extr, n_points=50,
                                  rng=np.random.default_rng(6))
        proj = project_lidar(pts, extr, K, 10, 10)
        assert np.allclose(proj[:, 2], 7.0, atol=1e-9)
