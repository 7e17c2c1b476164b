"""Independent reference computations used as test oracles.

Nothing here calls into the package's prox or envelope code.
"""

import numpy as np


def grid_argmin_1d(fun, center, span=5.0, levels=3, coarse_step=1e-3, refine_points=201):
    """Minimize a unimodal scalar function by nested grids.

    Level 1 scans ``[center - span, center + span]`` with ``coarse_step``;
    each further level rescans +-1 previous step around the incumbent with a
    step 100 times smaller, so three levels reach 1e-7 resolution.
    """
    ys = np.arange(center - span, center + span + coarse_step / 2, coarse_step)
    best = ys[np.argmin(fun(ys))]
    step = coarse_step
    for _ in range(levels - 1):
        fine = step / 100.0
        ys = np.linspace(best - step, best + step, refine_points)
        best = ys[np.argmin(fun(ys))]
        step = fine
    return float(best)


def prox_objective(penalty, alpha, x):
    """``y -> penalty(y) + (y - x)^2 / (2 alpha)`` vectorized over ``y``."""
    return lambda y: penalty(y) + (y - x) ** 2 / (2.0 * alpha)


# scalar penalties written out directly from their textbook definitions
def l1_pen(lam):
    return lambda y: lam * np.abs(y)


def mcp_pen(lam, th):
    def pen(y):
        a = np.abs(y)
        return np.where(a <= th * lam, lam * a - y ** 2 / (2 * th), th * lam ** 2 / 2)
    return pen


def scad_pen(lam, th):
    def pen(y):
        a = np.abs(y)
        return np.where(a <= lam, lam * a,
                        np.where(a <= th * lam, (2 * th * lam * a - y ** 2 - lam ** 2) / (2 * (th - 1)),
                                 lam ** 2 * (th + 1) / 2))
    return pen


def student_pen(th):
    return lambda y: th ** 2 / 2 * np.log(1 + y ** 2 / th ** 2)


def central_fd_grad(fun, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def quadratic_env_1d(q, lam, theta, x):
    """Envelope gradient of ``q x^2 / 2 + lam |x|`` by hand: prox is a scaled soft threshold."""
    z = x / (1 + theta * q)
    t = theta * lam / (1 + theta * q)
    y = np.sign(z) * max(abs(z) - t, 0.0)
    return (x - y) / theta
