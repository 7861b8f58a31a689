"""Limited-memory BFGS with a strong-Wolfe line search.

Self-contained so the energy minimization is deterministic and the accepted
objective sequence can be reported (it is non-increasing by construction).
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    fun_history: list = field(default_factory=list)


def _cubic_min(a, fa, ga, b, fb):
    """Minimizer of the cubic fitting f(a), f'(a), f(b) inside (a, b)."""
    h = b - a
    if h == 0:
        return a
    # quadratic fallback when the cubic is ill-conditioned
    denom = 2.0 * (fb - fa - ga * h)
    if denom <= 0 or not np.isfinite(denom):
        return a + 0.5 * h
    t = -ga * h * h / denom
    t = min(max(t, 0.1 * h), 0.9 * h) if h > 0 else max(min(t, 0.1 * h), 0.9 * h)
    return a + t


def _zoom(fg, x, p, f0, dphi0, lo, f_lo, g_lo, hi, f_hi, c1, c2, max_evals=30):
    """Wolfe zoom phase on the bracket [lo, hi]."""
    for _ in range(max_evals):
        a = _cubic_min(lo, f_lo, g_lo, hi, f_hi)
        if not np.isfinite(a) or a <= min(lo, hi) or a >= max(lo, hi):
            a = 0.5 * (lo + hi)
        f, g = fg(x + a * p)
        dphi = float(g @ p)
        if f > f0 + c1 * a * dphi0 or f >= f_lo:
            hi, f_hi = a, f
        else:
            if abs(dphi) <= -c2 * dphi0:
                return a, f, g
            if dphi * (hi - lo) >= 0:
                hi, f_hi = lo, f_lo
            lo, f_lo, g_lo = a, f, dphi
        if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
            break
    if f_lo < f0:
        f, g = fg(x + lo * p)
        return lo, f, g
    return None


def _wolfe_line_search(fg, x, p, f0, g0, c1=1e-4, c2=0.9, max_evals=25):
    """Strong Wolfe search along p. Returns (step, f, grad) or None."""
    dphi0 = float(g0 @ p)
    if dphi0 >= 0:
        return None
    a_prev, f_prev, dphi_prev = 0.0, f0, dphi0
    a = 1.0
    for i in range(max_evals):
        f, g = fg(x + a * p)
        dphi = float(g @ p)
        if f > f0 + c1 * a * dphi0 or (i > 0 and f >= f_prev):
            return _zoom(fg, x, p, f0, dphi0, a_prev, f_prev, dphi_prev, a, f, c1, c2)
        if abs(dphi) <= -c2 * dphi0:
            return a, f, g
        if dphi >= 0:
            return _zoom(fg, x, p, f0, dphi0, a, f, dphi, a_prev, f_prev, c1, c2)
        a_prev, f_prev, dphi_prev = a, f, dphi
        a *= 2.0
    return None


def minimize_lbfgs(fun_grad, x0, max_iter=500, grad_tol=1e-8, memory=10):
    """Minimize fun_grad(x) -> (f, grad) starting from x0.

    Converges when the gradient inf-norm drops below ``grad_tol`` or after
    ``max_iter`` iterations.  ``fun_history`` holds the objective at x0 and
    at every accepted iterate; the sequence never increases.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun_grad(x)
    if not np.isfinite(f):
        raise ValueError("objective is non-finite at the initial point")
    history = [float(f)]
    s_list, y_list, rho_list = [], [], []
    converged = bool(np.max(np.abs(g)) < grad_tol)
    n_iter = 0
    while not converged and n_iter < max_iter:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_list:
            gamma = (s_list[-1] @ y_list[-1]) / (y_list[-1] @ y_list[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        p = -q
        if p @ g >= 0:  # safeguard: fall back to steepest descent
            p = -g
            s_list, y_list, rho_list = [], [], []
        ls = _wolfe_line_search(fun_grad, x, p, f, g)
        if ls is None:
            break
        step, f_new, g_new = ls
        s = step * p
        y = g_new - g
        x = x + s
        f, g = f_new, g_new
        history.append(float(f))
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        n_iter += 1
        converged = bool(np.max(np.abs(g)) < grad_tol)
    return LbfgsResult(x, float(f), g, n_iter, converged, history)
