"""Piecewise-planar depth inference.

Each region of a frame gets plane parameters alpha minimizing

    sum_i sum_k ((r_ik . a_i) dhat_ik - 1)^2                      data
  + l_conn * sum_ij (y_ij/|B_ij|) sum_p ((r_p.(a_i-a_j)) s_ij)^2  connectivity
  + l_cop  * sum_ij y_ij ((r_q.(a_i-a_j)) dhat_j)^2               co-planarity

where dhat are unary depths predicted upstream, y_ij gates smoothness by the
probability that the shared boundary is non-occluding (y=0 decouples the
pair), s_ij = sqrt(dhat_i dhat_j) uses the region-mean unary depths, and
r_q is the ray of the neighbor region's center pixel (applied in both
directions by default).  Every term is quadratic in the alphas, so the
analytic gradient is exact; the solve runs L-BFGS from independent
per-region least-squares fits.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, DimensionMismatchError, EmptyInputError
from .geometry import fit_plane, render_depth
from .lbfgs import minimize_lbfgs


@dataclass
class RegionSamples:
    """Sampled rays of one region slice with their unary depths."""

    rays: np.ndarray    # (n, 3) unit rays
    depths: np.ndarray  # (n,) meters, > 0

    def __post_init__(self):
        self.rays = np.asarray(self.rays, dtype=np.float64)
        self.depths = np.asarray(self.depths, dtype=np.float64)
        if self.rays.ndim != 2 or self.rays.shape[1] != 3:
            raise DimensionMismatchError("rays must be (n, 3)")
        if self.rays.shape[0] != self.depths.shape[0]:
            raise DimensionMismatchError("one depth per ray required")
        if self.rays.shape[0] < 1:
            raise EmptyInputError("a region needs at least one sample ray")
        if np.any(self.depths <= 0) or not np.all(np.isfinite(self.depths)):
            raise ValueError("unary depths must be positive and finite")


@dataclass
class PairTerm:
    """Smoothness terms between two adjacent regions."""

    i: int
    j: int
    boundary_rays: np.ndarray  # (m, 3)
    gate: float                # y_ij in [0, 1]
    center_ray_i: np.ndarray   # (3,) ray of region i's center pixel
    center_ray_j: np.ndarray
    depth_i: float             # region-mean unary depths
    depth_j: float

    def __post_init__(self):
        self.boundary_rays = np.asarray(self.boundary_rays, dtype=np.float64)
        self.center_ray_i = np.asarray(self.center_ray_i, dtype=np.float64)
        self.center_ray_j = np.asarray(self.center_ray_j, dtype=np.float64)
        if self.boundary_rays.ndim != 2 or self.boundary_rays.shape[0] < 1:
            raise EmptyInputError("a pair needs at least one boundary ray")
        if not 0.0 <= self.gate <= 1.0:
            raise ValueError("gate must lie in [0, 1]")


@dataclass
class MrfProblem:
    regions: list
    pairs: list = field(default_factory=list)
    lambda_conn: float = 1.0
    lambda_cop: float = 0.5
    coplanarity_both_directions: bool = True

    def __post_init__(self):
        n = len(self.regions)
        if n == 0:
            raise EmptyInputError("problem has no regions")
        for p in self.pairs:
            if not (0 <= p.i < n and 0 <= p.j < n and p.i != p.j):
                raise ValueError(f"pair ({p.i}, {p.j}) references unknown regions")


@dataclass
class MrfSolution:
    alphas: np.ndarray
    energy: float
    energies: list
    n_iter: int
    converged: bool


# ---------------------------------------------------------------------------
# energy terms

def fractional_error(d_hat, ray, alpha):
    """Relative mismatch of a unary depth against a plane: dhat (r.a) - 1."""
    return float(d_hat * (np.asarray(ray) @ np.asarray(alpha)) - 1.0)


def data_energy(rays, depths, alpha):
    """Sum of squared fractional errors over a region's samples."""
    rays = np.asarray(rays, dtype=np.float64)
    depths = np.asarray(depths, dtype=np.float64)
    if rays.shape[0] < 1:
        raise EmptyInputError("data term needs at least one sample")
    res = depths * (rays @ np.asarray(alpha)) - 1.0
    return float(res @ res)


def connectivity_energy(boundary_rays, gate, alpha_i, alpha_j, depth_i, depth_j):
    """Boundary term: mean squared fractional gap along B_ij, gated by y."""
    rays = np.asarray(boundary_rays, dtype=np.float64)
    delta = np.asarray(alpha_i, dtype=np.float64) - np.asarray(alpha_j, dtype=np.float64)
    proj = rays @ delta
    scale = depth_i * depth_j  # (sqrt(di dj))^2
    return float(gate * scale * (proj @ proj) / rays.shape[0])


def coplanarity_energy(center_ray, gate, alpha_i, alpha_j, depth_j):
    """Center term, one direction: y ((r_q.(a_i - a_j)) dhat_j)^2."""
    delta = np.asarray(alpha_i, dtype=np.float64) - np.asarray(alpha_j, dtype=np.float64)
    proj = float(np.asarray(center_ray) @ delta)
    return float(gate * (proj * depth_j) ** 2)


def total_energy(problem, alphas):
    alphas = np.asarray(alphas, dtype=np.float64).reshape(len(problem.regions), 3)
    e = 0.0
    for reg, a in zip(problem.regions, alphas):
        e += data_energy(reg.rays, reg.depths, a)
    for p in problem.pairs:
        ai, aj = alphas[p.i], alphas[p.j]
        e += problem.lambda_conn * connectivity_energy(
            p.boundary_rays, p.gate, ai, aj, p.depth_i, p.depth_j
        )
        e += problem.lambda_cop * coplanarity_energy(
            p.center_ray_j, p.gate, ai, aj, p.depth_j
        )
        if problem.coplanarity_both_directions:
            e += problem.lambda_cop * coplanarity_energy(
                p.center_ray_i, p.gate, ai, aj, p.depth_i
            )
    return float(e)


def total_energy_grad(problem, alphas):
    """(energy, gradient) with the gradient exact: every term is quadratic."""
    alphas = np.asarray(alphas, dtype=np.float64).reshape(len(problem.regions), 3)
    grad = np.zeros_like(alphas)
    e = 0.0
    for idx, (reg, a) in enumerate(zip(problem.regions, alphas)):
        res = reg.depths * (reg.rays @ a) - 1.0
        e += res @ res
        grad[idx] += 2.0 * ((res * reg.depths) @ reg.rays)
    for p in problem.pairs:
        delta = alphas[p.i] - alphas[p.j]
        rays = p.boundary_rays
        proj = rays @ delta
        scale = problem.lambda_conn * p.gate * p.depth_i * p.depth_j / rays.shape[0]
        e += scale * (proj @ proj)
        g = 2.0 * scale * (proj @ rays)
        grad[p.i] += g
        grad[p.j] -= g
        for ray, depth, enabled in (
            (p.center_ray_j, p.depth_j, True),
            (p.center_ray_i, p.depth_i, problem.coplanarity_both_directions),
        ):
            if not enabled:
                continue
            cproj = float(ray @ delta)
            w = problem.lambda_cop * p.gate * depth * depth
            e += w * cproj * cproj
            gc = 2.0 * w * cproj * ray
            grad[p.i] += gc
            grad[p.j] -= gc
    return float(e), grad


# ---------------------------------------------------------------------------
# solving

def independent_fits(problem):
    """Per-region fit_plane against the unaries: the default solver
    initialization."""
    alphas = np.zeros((len(problem.regions), 3))
    for idx, reg in enumerate(problem.regions):
        try:
            alphas[idx] = fit_plane(reg.rays, reg.depths)
        except DegenerateGeometryError:
            # not enough ray spread: fall back to the fronto-parallel plane
            # through the mean depth
            alphas[idx] = np.array([0.0, 0.0, 1.0 / reg.depths.mean()])
    return alphas


def unary_only_fits(problem):
    """Exact per-region minimizers of the data term alone (closed form):
    the smoothness-free baseline that gated solves are compared against."""
    alphas = np.zeros((len(problem.regions), 3))
    for idx, reg in enumerate(problem.regions):
        A = reg.depths[:, None] * reg.rays
        b = np.ones(reg.depths.shape[0])
        sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if rank < 3:
            sol = np.array([0.0, 0.0, 1.0 / reg.depths.mean()])
        alphas[idx] = sol
    return alphas


def solve(problem, init=None, max_iter=500, grad_tol=1e-8, lbfgs_memory=10):
    """Minimize the MRF energy with L-BFGS.

    The accepted-energy sequence is non-increasing; converged means the
    gradient inf-norm dropped below grad_tol within max_iter iterations.
    """
    init = independent_fits(problem) if init is None else np.asarray(init, dtype=np.float64)
    x0 = init.reshape(-1)

    def fg(x):
        e, g = total_energy_grad(problem, x)
        return e, g.reshape(-1)

    res = minimize_lbfgs(fg, x0, max_iter=max_iter, grad_tol=grad_tol,
                         memory=lbfgs_memory)
    return MrfSolution(
        alphas=res.x.reshape(len(problem.regions), 3),
        energy=res.fun,
        energies=res.fun_history,
        n_iter=res.n_iter,
        converged=res.converged,
    )


# ---------------------------------------------------------------------------
# temporal smoothing of solved planes

def temporal_plane_smooth(alphas_by_frame, window=5):
    """Replace each region's alpha at frame t with the component-wise
    median over the centered window (intersected with the frames where the
    region was solved).  window=1 is the identity."""
    if window < 1:
        raise ValueError("window must be >= 1")
    frames_of = {}
    for t, planes in enumerate(alphas_by_frame):
        for region in planes:
            frames_of.setdefault(region, []).append(t)
    out = [dict() for _ in alphas_by_frame]
    lo_off = window // 2
    hi_off = (window - window // 2) - 1
    for region, frames in frames_of.items():
        frames = np.asarray(frames)
        stack = np.stack([alphas_by_frame[t][region] for t in frames])
        for pos, t in enumerate(frames):
            mask = (frames >= t - lo_off) & (frames <= t + hi_off)
            out[t][region] = np.median(stack[mask], axis=0)
    return out


def temporal_depth_smooth(labels, alphas_by_frame, K, window=5):
    """Smooth solved planes over time, then re-render per-frame depth."""
    labels = np.asarray(labels)
    smoothed = temporal_plane_smooth(alphas_by_frame, window)
    return [
        render_depth(labels[t], smoothed[t], K) for t in range(labels.shape[0])
    ]
