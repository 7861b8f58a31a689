import numpy as np
import pytest
from helpers import (
    finite_difference_grad,
    lstsq_solution,
    random_alphas,
    random_problem,
    random_unit_rays,
)

from planedepth.errors import EmptyInputError
from planedepth.geometry import fit_plane, pixel_ray, plane_depth
from planedepth.mrf import (
    MrfProblem,
    PairTerm,
    RegionSamples,
    connectivity_energy,
    coplanarity_energy,
    data_energy,
    fractional_error,
    independent_fits,
    solve,
    unary_only_fits,
    temporal_plane_smooth,
    total_energy,
    total_energy_grad,
)

Z = np.array([0.0, 0.0, 1.0])


class TestFractionalError:
    def test_consistent_depth_zero(self):
        rng = np.random.default_rng(0)
        alpha = random_alphas(rng, 1)[0]
        ray = random_unit_rays(rng, 1)[0]
        d = plane_depth(ray, alpha)
        assert fractional_error(d, ray, alpha) == pytest.approx(0.0, abs=1e-12)

    def test_hand_case(self):
        assert fractional_error(20.0, Z, [0, 0, 0.1]) == pytest.approx(1.0)

    def test_zero_plane(self):
        assert fractional_error(7.0, Z, [0, 0, 0]) == pytest.approx(-1.0)


class TestDataEnergy:
    def test_consistent_plane_zero(self):
        rng = np.random.default_rng(1)
        alpha = random_alphas(rng, 1)[0]
        rays = random_unit_rays(rng, 20)
        depths = plane_depth(rays, alpha)
        assert data_energy(rays, depths, alpha) == pytest.approx(0.0, abs=1e-20)

    def test_single_sample_zero_plane(self):
        assert data_energy(Z[None, :], np.array([5.0]), np.zeros(3)) == pytest.approx(1.0)

    def test_matches_term_loop(self):
        rng = np.random.default_rng(2)
        rays = random_unit_rays(rng, 7)
        depths = rng.uniform(2, 30, 7)
        alpha = random_alphas(rng, 1)[0]
        want = sum(
            fractional_error(d, r, alpha) ** 2 for r, d in zip(rays, depths)
        )
        assert data_energy(rays, depths, alpha) == pytest.approx(want)

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            data_energy(np.zeros((0, 3)), np.zeros(0), Z)


class TestConnectivityEnergy:
    def test_equal_planes_zero(self):
        rng = np.random.default_rng(3)
        a = random_alphas(rng, 1)[0]
        assert connectivity_energy(random_unit_rays(rng, 5), 1.0, a, a, 5, 10) == 0

    def test_zero_gate(self):
        rng = np.random.default_rng(4)
        a, b = random_alphas(rng, 2)
        assert connectivity_energy(random_unit_rays(rng, 5), 0.0, a, b, 5, 10) == 0

    def test_hand_case(self):
        # one axial boundary ray, alphas differing by 0.1 in z, sqrt(5*10)
        got = connectivity_energy(Z[None, :], 1.0, [0, 0, 0.2], [0, 0, 0.1], 5.0, 10.0)
        assert got == pytest.approx(0.5)

    def test_gate_linearity(self):
        rng = np.random.default_rng(5)
        a, b = random_alphas(rng, 2)
        rays = random_unit_rays(rng, 4)
        full = connectivity_energy(rays, 1.0, a, b, 5, 10)
        half = connectivity_energy(rays, 0.5, a, b, 5, 10)
        assert half == pytest.approx(0.5 * full)


class TestCoplanarityEnergy:
    def test_equal_planes_zero(self):
        rng = np.random.default_rng(6)
        a = random_alphas(rng, 1)[0]
        assert coplanarity_energy(Z, 1.0, a, a, 10.0) == 0

    def test_hand_case(self):
        got = coplanarity_energy(Z, 1.0, [0, 0, 0.2], [0, 0, 0.1], 10.0)
        assert got == pytest.approx(1.0)

    def test_gate_halves(self):
        got = coplanarity_energy(Z, 0.5, [0, 0, 0.2], [0, 0, 0.1], 10.0)
        assert got == pytest.approx(0.5)


class TestTotalEnergy:
    def test_self_consistent_region_zero(self):
        rng = np.random.default_rng(7)
        alpha = random_alphas(rng, 1)[0]
        rays = random_unit_rays(rng, 15)
        problem = MrfProblem([RegionSamples(rays, plane_depth(rays, alpha))])
        e, g = total_energy_grad(problem, alpha[None, :])
        assert e == pytest.approx(0.0, abs=1e-20)
        assert np.allclose(g, 0.0, atol=1e-12)

    def test_additivity(self):
        rng = np.random.default_rng(8)
        problem = random_problem(rng)
        alphas = random_alphas(rng, len(problem.regions))
        want = sum(
            data_energy(r.rays, r.depths, a)
            for r, a in zip(problem.regions, alphas)
        )
        for p in problem.pairs:
            want += problem.lambda_conn * connectivity_energy(
                p.boundary_rays, p.gate, alphas[p.i], alphas[p.j],
                p.depth_i, p.depth_j,
            )
            want += problem.lambda_cop * coplanarity_energy(
                p.center_ray_j, p.gate, alphas[p.i], alphas[p.j], p.depth_j
            )
            want += problem.lambda_cop * coplanarity_energy(
                p.center_ray_i, p.gate, alphas[p.i], alphas[p.j], p.depth_i
            )
        assert total_energy(problem, alphas) == pytest.approx(want)

    def test_energy_and_grad_agree(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            problem = random_problem(rng)
            alphas = random_alphas(rng, len(problem.regions))
            e1 = total_energy(problem, alphas)
            e2, _ = total_energy_grad(problem, alphas)
            assert e1 == pytest.approx(e2)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            problem = random_problem(rng)
            alphas = random_alphas(rng, len(problem.regions))
            _, analytic = total_energy_grad(problem, alphas)
            numeric = finite_difference_grad(problem, alphas)
            scale = max(np.abs(analytic).max(), 1e-12)
            assert np.abs(analytic - numeric).max() / scale < 1e-5


class TestSolve:
    def test_matches_lstsq_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            problem = random_problem(rng, max_regions=6)
            sol = solve(problem, grad_tol=1e-10)
            direct = lstsq_solution(problem)
            e_direct = total_energy(problem, direct)
            assert sol.energy <= e_direct + 1e-8 * max(1, abs(e_direct))
            assert np.allclose(sol.alphas, direct, atol=1e-5)

    def test_energy_sequence_non_increasing(self):
        rng = np.random.default_rng(12)
        problem = random_problem(rng)
        sol = solve(problem)
        assert np.all(np.diff(sol.energies) <= 0)

    def test_zero_gate_equals_independent_fits(self):
        rng = np.random.default_rng(13)
        rays_a = random_unit_rays(rng, 30)
        rays_b = random_unit_rays(rng, 30)
        true_a, true_b = random_alphas(rng, 2)
        noisy_a = plane_depth(rays_a, true_a) * rng.lognormal(0, 0.1, 30)
        noisy_b = plane_depth(rays_b, true_b) * rng.lognormal(0, 0.1, 30)
        regions = [RegionSamples(rays_a, noisy_a), RegionSamples(rays_b, noisy_b)]
        pair = PairTerm(0, 1, random_unit_rays(rng, 5), 0.0,
                        random_unit_rays(rng, 1)[0], random_unit_rays(rng, 1)[0],
                        float(noisy_a.mean()), float(noisy_b.mean()))
        problem = MrfProblem(regions, [pair])
        sol = solve(problem, grad_tol=1e-10)
        baseline = unary_only_fits(problem)
        assert np.allclose(sol.alphas, baseline, atol=1e-6)

    def test_open_gate_pulls_planes_together(self):
        rng = np.random.default_rng(14)
        true_alpha = random_alphas(rng, 1)[0]
        regions = []
        for _ in range(2):
            rays = random_unit_rays(rng, 40)
            depths = plane_depth(rays, true_alpha) * rng.lognormal(0, 0.1, 40)
            regions.append(RegionSamples(rays, depths))
        pair = PairTerm(0, 1, random_unit_rays(rng, 8), 1.0,
                        random_unit_rays(rng, 1)[0], random_unit_rays(rng, 1)[0],
                        float(regions[0].depths.mean()),
                        float(regions[1].depths.mean()))
        problem = MrfProblem(regions, [pair])
        independent = independent_fits(problem)
        sol = solve(problem, grad_tol=1e-10)
        d_ind = np.linalg.norm(independent[0] - independent[1])
        d_mrf = np.linalg.norm(sol.alphas[0] - sol.alphas[1])
        assert d_mrf < d_ind

    def test_exact_recovery_two_planes(self):
        # oracle unaries, occluding boundary (gate 0): exact recovery
        K_rays = [pixel_ray_grid_sample(i) for i in range(2)]
        rng = np.random.default_rng(15)
        alphas_true = random_alphas(rng, 2)
        regions = [
            RegionSamples(r, plane_depth(r, a))
            for r, a in zip(K_rays, alphas_true)
        ]
        pair = PairTerm(0, 1, random_unit_rays(rng, 5), 0.0, Z, Z, 10.0, 10.0)
        sol = solve(MrfProblem(regions, [pair]), grad_tol=1e-12)
        assert np.allclose(sol.alphas, alphas_true, atol=1e-7)


def pixel_ray_grid_sample(seed):
    rng = np.random.default_rng(100 + seed)
    us = rng.uniform(0, 640, 50)
    vs = rng.uniform(0, 480, 50)
    from planedepth.geometry import CameraIntrinsics

    return pixel_ray(CameraIntrinsics(500, 500, 320, 240), us, vs)


class TestTemporalPlaneSmooth:
    def test_constant_unchanged(self):
        alpha = np.array([0.01, -0.02, 0.1])
        frames = [{0: alpha.copy()} for _ in range(6)]
        out = temporal_plane_smooth(frames, window=5)
        for planes in out:
            assert np.allclose(planes[0], alpha)

    def test_spike_removed_by_median(self):
        alpha = np.array([0.0, 0.0, 0.1])
        spike = np.array([0.0, 0.0, 0.9])
        frames = [{0: alpha.copy()} for _ in range(7)]
        frames[3][0] = spike
        out = temporal_plane_smooth(frames, window=5)
        assert np.allclose(out[3][0], alpha)

    def test_window_one_identity(self):
        rng = np.random.default_rng(16)
        frames = [{0: rng.standard_normal(3)} for _ in range(4)]
        out = temporal_plane_smooth(frames, window=1)
        for a, b in zip(frames, out):
            assert np.array_equal(a[0], b[0])

    def test_region_missing_some_frames(self):
        # window [t-1, t+1] at t=0 only sees frame 0 for this track
        frames = [{0: np.array([0.0, 0.0, 0.1])},
                  {},
                  {0: np.array([0.0, 0.0, 0.3])}]
        out = temporal_plane_smooth(frames, window=3)
        assert 0 not in out[1]
        assert np.allclose(out[0][0], [0, 0, 0.1])
        assert np.allclose(out[2][0], [0, 0, 0.3])
