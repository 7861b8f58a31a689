import numpy as np
import pytest

from planedepth.errors import (
    BehindCameraError,
    DegenerateGeometryError,
    MissingPlaneError,
)
from planedepth.geometry import (
    D_MAX,
    CameraIntrinsics,
    fit_plane,
    pixel_ray,
    plane_depth,
    ray_grid,
    region_centroid_pixel,
    render_depth,
)

K_UNIT = CameraIntrinsics(1.0, 1.0, 0.0, 0.0)
K_VGA = CameraIntrinsics(500.0, 500.0, 320.0, 240.0)


def random_valid_plane(rng):
    # fronto-parallel base plus a bounded tilt keeps r.alpha > 0 in-frustum
    base = 1.0 / rng.uniform(2.0, 60.0)
    tilt = rng.uniform(-0.4, 0.4, size=2) * base
    return np.array([tilt[0], tilt[1], base])


class TestPixelRay:
    def test_principal_point_unit_camera(self):
        assert np.allclose(pixel_ray(K_UNIT, 0, 0), [0, 0, 1])

    def test_principal_point_vga(self):
        assert np.allclose(pixel_ray(K_VGA, 320, 240), [0, 0, 1])

    def test_off_axis_pixel(self):
        # K^-1 (820, 240, 1) = (1, 0, 1), normalized
        expected = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
        assert np.allclose(pixel_ray(K_VGA, 820, 240), expected, atol=1e-12)

    def test_unit_norm_and_z_component(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            u = rng.uniform(-100, 800)
            v = rng.uniform(-100, 600)
            r = pixel_ray(K_VGA, u, v)
            assert np.isclose(np.linalg.norm(r), 1.0, atol=1e-12)
            x = (u - K_VGA.u0) / K_VGA.fu
            y = (v - K_VGA.v0) / K_VGA.fv
            assert np.isclose(r[2], 1.0 / np.sqrt(x * x + y * y + 1.0))

    def test_grid_matches_scalar(self):
        g = ray_grid(K_VGA, 5, 4)
        for v in range(4):
            for u in range(5):
                assert np.allclose(g[v, u], pixel_ray(K_VGA, u, v))


class TestPlaneDepth:
    def test_axis_aligned(self):
        assert plane_depth([0, 0, 1], [0, 0, 0.5]) == pytest.approx(2.0)
        assert plane_depth([0, 0, 1], [0, 0, 0.1]) == pytest.approx(10.0)

    def test_tilted_ray(self):
        r = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
        assert plane_depth(r, [0, 0, 0.1]) == pytest.approx(10.0 * np.sqrt(2.0))

    def test_point_lands_on_plane(self):
        rng = np.random.default_rng(1)
        alpha = random_valid_plane(rng)
        r = pixel_ray(K_VGA, 400, 300)
        d = plane_depth(r, alpha)
        point = r * d
        # plane equation in point space: alpha . x = 1
        assert np.isclose(alpha @ point, 1.0, atol=1e-12)

    def test_behind_camera(self):
        with pytest.raises(BehindCameraError):
            plane_depth([0, 0, 1], [0, 0, -0.1])
        with pytest.raises(BehindCameraError):
            plane_depth([0, 0, 1], [0, 0, 0.0])


class TestFitPlane:
    def test_three_rays_closed_form(self):
        # rank-3 system solved exactly: compare against the normal equations
        rays = np.stack(
            [
                pixel_ray(K_VGA, 320, 240),
                pixel_ray(K_VGA, 520, 240),
                pixel_ray(K_VGA, 320, 440),
            ]
        )
        depths = np.full(3, 10.0)
        expected = np.linalg.solve(rays, 1.0 / depths)
        assert np.allclose(fit_plane(rays, depths), expected, atol=1e-12)

    def test_round_trip_known_plane(self):
        alpha = np.array([0.02, -0.01, 0.09])
        us, vs = np.meshgrid(np.linspace(0, 639, 8), np.linspace(0, 479, 8))
        rays = pixel_ray(K_VGA, us.ravel(), vs.ravel())
        depths = plane_depth(rays, alpha)
        assert np.allclose(fit_plane(rays, depths), alpha, atol=1e-9)

    def test_round_trip_random(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            alpha = random_valid_plane(rng)
            us = rng.uniform(0, 640, size=12)
            vs = rng.uniform(0, 480, size=12)
            rays = pixel_ray(K_VGA, us, vs)
            depths = plane_depth(rays, alpha)
            got = fit_plane(rays, depths)
            assert np.max(np.abs(got - alpha)) <= 1e-9 * max(1.0, np.abs(alpha).max())

    def test_collinear_rays_degenerate(self):
        rays = pixel_ray(K_VGA, np.array([100.0, 200.0, 300.0]), np.full(3, 240.0))
        with pytest.raises(DegenerateGeometryError):
            fit_plane(rays, np.full(3, 10.0))

    def test_too_few_rays(self):
        with pytest.raises(DegenerateGeometryError):
            fit_plane(np.eye(3)[:2], np.full(2, 5.0))


class TestRenderDepth:
    def test_single_region_center_pixel(self):
        labels = np.zeros((480, 640), dtype=np.int32)
        dm = render_depth(labels, {0: np.array([0, 0, 0.1])}, K_VGA)
        assert dm.values[240, 320] == pytest.approx(10.0)
        assert dm.valid.all()

    def test_far_plane_clamp(self):
        labels = np.zeros((48, 64), dtype=np.int32)
        dm = render_depth(labels, {0: np.array([0, 0, 1e-9])}, K_VGA)
        assert np.all(dm.values == D_MAX)
        assert dm.valid.all()

    def test_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(3)
        labels = np.zeros((20, 30), dtype=np.int32)
        labels[:, 15:] = 1
        planes = {0: random_valid_plane(rng), 1: random_valid_plane(rng)}
        K = CameraIntrinsics.default(30, 20)
        dm = render_depth(labels, planes, K)
        for y in range(20):
            for x in range(30):
                r = pixel_ray(K, x, y)
                d = min(plane_depth(r, planes[int(labels[y, x])]), D_MAX)
                assert dm.values[y, x] == pytest.approx(d, abs=1e-12)

    def test_missing_plane(self):
        labels = np.zeros((4, 4), dtype=np.int32)
        labels[0, 0] = 7
        with pytest.raises(MissingPlaneError):
            render_depth(labels, {0: np.array([0, 0, 0.1])}, K_VGA)

    def test_plane_table_array(self):
        labels = np.zeros((6, 6), dtype=np.int32)
        dm = render_depth(labels, np.array([[0.0, 0.0, 0.2]]), K_VGA)
        assert dm.values[0, 0] > 0


def test_region_centroid_pixel_simple():
    ys, xs = np.meshgrid(np.arange(5), np.arange(5), indexing="ij")
    y, x = region_centroid_pixel(ys.ravel(), xs.ravel())
    assert (y, x) == (2, 2)


def test_region_centroid_pixel_snaps_into_region():
    # C-shape whose centroid falls in the gap: result must still be a region pixel
    ys = np.array([0, 1, 2, 0, 2, 0, 2])
    xs = np.array([0, 0, 0, 1, 1, 2, 2])
    y, x = region_centroid_pixel(ys, xs)
    assert (y, x) in set(zip(ys.tolist(), xs.tolist()))
