"""Shared fixtures for MRF tests: random problem instances and the direct
least-squares oracle (the whole energy is a quadratic, so lstsq on the
stacked system is an independent route to the optimum)."""

import numpy as np

from planedepth.mrf import MrfProblem, PairTerm, RegionSamples


def random_unit_rays(rng, n, spread=0.5):
    xy = rng.uniform(-spread, spread, size=(n, 2))
    rays = np.hstack([xy, np.ones((n, 1))])
    return rays / np.linalg.norm(rays, axis=1, keepdims=True)


def random_problem(rng, max_regions=10, lambda_conn=1.0, lambda_cop=0.5):
    n_regions = int(rng.integers(2, max_regions + 1))
    regions = []
    for _ in range(n_regions):
        n = int(rng.integers(4, 30))
        regions.append(
            RegionSamples(random_unit_rays(rng, n), rng.uniform(2.0, 60.0, n))
        )
    pairs = []
    for i in range(n_regions - 1):
        if rng.random() < 0.8:
            j = i + 1
            gate = float(rng.choice([0.0, 1.0, rng.random()]))
            m = int(rng.integers(1, 10))
            pairs.append(
                PairTerm(
                    i, j,
                    boundary_rays=random_unit_rays(rng, m),
                    gate=gate,
                    center_ray_i=random_unit_rays(rng, 1)[0],
                    center_ray_j=random_unit_rays(rng, 1)[0],
                    depth_i=float(regions[i].depths.mean()),
                    depth_j=float(regions[j].depths.mean()),
                )
            )
    return MrfProblem(regions, pairs, lambda_conn=lambda_conn,
                      lambda_cop=lambda_cop)


def random_alphas(rng, n_regions):
    base = 1.0 / rng.uniform(2.0, 60.0, size=(n_regions, 1))
    tilt = rng.uniform(-0.4, 0.4, size=(n_regions, 2)) * base
    return np.hstack([tilt, base])


def finite_difference_grad(problem, alphas, h_scale=1e-6):
    from planedepth.mrf import total_energy

    x = np.asarray(alphas, dtype=np.float64).reshape(-1)
    grad = np.zeros_like(x)
    for k in range(x.size):
        h = h_scale * max(1.0, abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        grad[k] = (total_energy(problem, xp) - total_energy(problem, xm)) / (2 * h)
    return grad.reshape(-1, 3)


def lstsq_solution(problem):
    """Stack the energy as ||Ax - b||^2 and solve directly."""
    n = len(problem.regions)
    rows, rhs = [], []

    def block(vec, idx, vec2=None, idx2=None):
        row = np.zeros(3 * n)
        row[3 * idx : 3 * idx + 3] = vec
        if vec2 is not None:
            row[3 * idx2 : 3 * idx2 + 3] += vec2
        return row

    for idx, reg in enumerate(problem.regions):
        for ray, depth in zip(reg.rays, reg.depths):
            rows.append(block(depth * ray, idx))
            rhs.append(1.0)
    for p in problem.pairs:
        m = p.boundary_rays.shape[0]
        w = np.sqrt(problem.lambda_conn * p.gate * p.depth_i * p.depth_j / m)
        for ray in p.boundary_rays:
            rows.append(block(w * ray, p.i, -w * ray, p.j))
            rhs.append(0.0)
        centers = [(p.center_ray_j, p.depth_j)]
        if problem.coplanarity_both_directions:
            centers.append((p.center_ray_i, p.depth_i))
        for ray, depth in centers:
            w = np.sqrt(problem.lambda_cop * p.gate) * depth
            rows.append(block(w * ray, p.i, -w * ray, p.j))
            rhs.append(0.0)
    A = np.asarray(rows)
    b = np.asarray(rhs)
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    return x.reshape(n, 3)
