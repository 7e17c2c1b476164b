"""Stationarity measures for composite problems ``psi = f + phi``.

The natural residual and the Moreau envelope gradient both vanish exactly at
first-order stationary points.  The envelope is evaluated by an inner solver
since no closed form exists in general.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .regularizers import Regularizer, prox_eval

__all__ = [
    "CompositeProblem",
    "EnvelopeResult",
    "BoundReport",
    "natural_residual",
    "moreau_prox",
    "check_equivalence_bounds",
    "default_theta",
    "default_alpha",
    "envelope_lipschitz",
    "envelope_grad_norm",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 100_000


@dataclass(frozen=True)
class CompositeProblem:
    """``psi(x) = f(x) + phi(x)`` with ``psi >= psi_lower``.

    ``f`` is usually a smooth objective.  Objectives with ``smooth = False``
    (sample averages of nonsmooth losses) are supported in one dimension; they
    must expose ``right_derivative`` and ``weak_convexity``.
    """

    f: object
    phi: Regularizer
    psi_lower: float = field(default=np.nan)

    def __post_init__(self):
        if self.phi.dim != self.f.dim:
            object.__setattr__(self, "phi", self.phi.with_dim(self.f.dim))
        if np.isnan(self.psi_lower):
            object.__setattr__(self, "psi_lower", float(self.f.lower_bound + self.phi.lower_bound))

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def smooth(self) -> bool:
        return getattr(self.f, "smooth", True)

    @property
    def L(self) -> float:
        """Modulus entering the envelope ranges: ``L`` for smooth ``f``, else its weak convexity."""
        return float(self.f.lipschitz) if self.smooth else float(self.f.weak_convexity)

    @property
    def tau(self) -> float:
        return float(self.phi.tau)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.f.value(x)) + self.phi.value(x)


@dataclass(frozen=True)
class EnvelopeResult:
    theta: float
    prox_point: np.ndarray
    env_value: float
    env_grad: np.ndarray
    inner_iters: int
    residual: float
    converged: bool = True


@dataclass(frozen=True)
class BoundReport:
    """Both sides of the envelope / natural-residual equivalence at one point.

    ``stated_*`` use the constants as usually quoted.  ``corrected_*`` use
    constants derived directly at the residual step ``a``: ``ybar`` is a
    fixed point of the ``a``-prox-gradient map, which gives
    ``|F^a| <= theta |grad env| (1 + (|1 - a/theta| + a L)/(1 - a tau))``, and
    the envelope subproblem is ``mu = 1/theta - (L + tau)`` strongly convex,
    which gives ``|grad env| <= |F^a| (1 + (|1/a - 1/theta| + L)/mu) / theta``.
    """

    theta: float
    gamma: float
    alpha_used: float
    env_grad_norm: float
    nat_norm: float
    slack: float
    stated_lower: float
    stated_upper: float
    corrected_lower: float
    corrected_upper: float

    @property
    def stated_lower_ok(self) -> bool:
        return self.stated_lower <= self.env_grad_norm + self.slack

    @property
    def stated_upper_ok(self) -> bool:
        return self.env_grad_norm <= self.stated_upper + self.slack

    @property
    def stated_pass(self) -> bool:
        return self.stated_lower_ok and self.stated_upper_ok

    @property
    def corrected_pass(self) -> bool:
        return (self.corrected_lower <= self.env_grad_norm + self.slack
                and self.env_grad_norm <= self.corrected_upper + self.slack)


def default_alpha(cp: CompositeProblem) -> float:
    """Residual step ``min(1, 1/(2 tau))``; keeps the prox single-valued."""
    return 1.0 if cp.tau <= 0 else min(1.0, 0.5 / cp.tau)


def default_theta(cp: CompositeProblem) -> float:
    return 1.0 / (2.0 * (3.0 * cp.L + cp.tau + 1.0))


def envelope_lipschitz(cp: CompositeProblem, theta: float) -> float:
    """Gradient modulus ``max{1/theta, (L+tau)/(1-(L+tau) theta)}`` of the envelope."""
    w = cp.L + cp.tau
    return max(1.0 / theta, w / (1.0 - w * theta))


def natural_residual(cp: CompositeProblem, alpha: float, x) -> np.ndarray:
    """``x - prox_{alpha phi}(x - alpha grad f(x))``."""
    if not cp.smooth:
        raise ValueError("natural residual needs a smooth f")
    alpha = float(alpha)
    if not alpha > 0 or (cp.tau > 0 and alpha * cp.tau >= 1.0):
        raise ValueError(f"alpha={alpha} outside (0, 1/tau)")
    x = np.asarray(x, dtype=float)
    return x - prox_eval(cp.phi, alpha, x - alpha * cp.f.gradient(x))


def _check_theta(cp, theta):
    theta = float(theta)
    w = cp.L + cp.tau
    if not theta > 0 or theta * w >= 1.0:
        raise ValueError(f"theta={theta} outside (0, 1/(L+tau))")
    return theta


def _envelope_smooth(cp, theta, x, tol, max_iters):
    f, phi = cp.f, cp.phi
    beta = 1.0 / (f.lipschitz + 1.0 / theta + cp.tau)
    y = prox_eval(phi, theta, x) if phi.tau * theta < 1 else x.copy()
    res = np.inf
    it = 0
    converged = False
    while it < max_iters:
        y_new = prox_eval(phi, beta, y - beta * (f.gradient(y) + (y - x) / theta))
        res = float(np.linalg.norm(y_new - y))
        y = y_new
        it += 1
        if res <= tol:
            converged = True
            break
    return y, it, res, converged


def _envelope_bisect_1d(cp, theta, x, tol, max_iters, points=129):
    # F(y) = psi(y) + (y - x)^2 / (2 theta) is strongly convex; its right
    # derivative is increasing and changes sign at the minimizer.  Multisection
    # on a grid of points shrinks the bracket by a factor (points - 1) per pass.
    f, phi = cp.f, cp.phi
    x0 = float(x[0])
    grid_fn = getattr(f, "right_derivative_grid", None)

    def dF(ys):
        ys = np.asarray(ys, dtype=float)
        if grid_fn is not None:
            df = grid_fn(ys)
        else:
            df = np.array([f.right_derivative(np.array([y]))[0] for y in ys])
        return df + phi.coord_right_derivative(ys) + (ys - x0) / theta

    lo, hi, w = x0, x0, 1.0
    while dF([lo])[0] >= 0:
        lo = x0 - w
        w *= 2
    w = 1.0
    while dF([hi])[0] < 0:
        hi = x0 + w
        w *= 2
    it = 0
    target = tol * 1e-3 * (1.0 + abs(x0))
    while hi - lo > target and it < max_iters:
        ys = np.linspace(lo, hi, points)
        pos = dF(ys[1:-1]) >= 0
        j = int(np.argmax(pos)) if pos.any() else points - 2
        new_lo, new_hi = (ys[j], ys[j + 1]) if pos.any() else (ys[-2], hi)
        it += 1
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = new_lo, new_hi
    # the minimizer is one of the two ends up to rounding; pick the better
    Fv = [cp.value(np.array([t])) + (t - x0) ** 2 / (2 * theta) for t in (lo, hi)]
    y = np.array([(lo, hi)[int(np.argmin(Fv))]])
    return y, it, hi - lo, True


def moreau_prox(cp: CompositeProblem, theta: float, x, tol: float = DEFAULT_TOL,
                max_iters: int = DEFAULT_MAX_ITERS) -> EnvelopeResult:
    """Evaluate ``prox_{theta psi}(x)``, the envelope and its gradient.

    Smooth ``f`` uses proximal gradient on the strongly convex subproblem with
    step ``1/(L + 1/theta + tau)``, started at ``prox_{theta phi}(x)``.
    Nonsmooth one-dimensional ``f`` uses bisection on the right derivative.
    """
    theta = _check_theta(cp, theta)
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    if cp.smooth:
        y, it, res, ok = _envelope_smooth(cp, theta, x, tol, max_iters)
    else:
        if cp.dim != 1:
            raise ValueError("nonsmooth envelopes are only supported in one dimension")
        y, it, res, ok = _envelope_bisect_1d(cp, theta, x, tol, max_iters)
    d = x - y
    env = cp.value(y) + float(d @ d) / (2.0 * theta)
    return EnvelopeResult(theta, y, env, d / theta, it, res, ok)


def envelope_grad_norm(cp: CompositeProblem, theta: float, x, tol: float = DEFAULT_TOL) -> float:
    return float(np.linalg.norm(moreau_prox(cp, theta, x, tol).env_grad))


def check_equivalence_bounds(cp: CompositeProblem, theta: float, x, tol: float = 1e-12,
                             alpha: float | None = None) -> BoundReport:
    """Compare ``||grad env_{theta psi}(x)||`` with the natural residual.

    Requires ``theta < 1/(3L + tau)``.  The residual step defaults to
    ``min(1, 1/(2 tau))``.  Stated bounds refer to the residual with unit
    step; when a smaller step is used they are transported with
    ``|F^a| <= |F^1| <= |F^a| / a``.
    """
    L, tau = cp.L, cp.tau
    theta = float(theta)
    if not 0 < theta < 1.0 / (3 * L + tau):
        raise ValueError(f"theta={theta} outside (0, 1/(3L+tau))")
    a = default_alpha(cp) if alpha is None else float(alpha)
    x = np.asarray(x, dtype=float).reshape(-1)
    env = moreau_prox(cp, theta, x, tol)
    g = float(np.linalg.norm(env.env_grad))
    nat = float(np.linalg.norm(natural_residual(cp, a, x)))
    gamma = theta / (1.0 - (L + tau) * theta)
    c_low = (1.0 - (3 * L + tau) * theta) * gamma / theta ** 2
    c_up = (1.0 + (L - tau) * theta) * (gamma + tau) / theta ** 2
    nat1_lo = nat * min(1.0, 1.0 / a)
    nat1_hi = nat * max(1.0, 1.0 / a)
    lo_corr = nat / (theta * (1.0 + (abs(1.0 - a / theta) + a * L) / (1.0 - a * tau)))
    mu = 1.0 / theta - (L + tau)
    up_corr = nat * (1.0 + (abs(1.0 / a - 1.0 / theta) + L) / mu) / theta
    slack = 1e-8 * (1.0 + float(np.linalg.norm(x)))
    return BoundReport(theta, gamma, a, g, nat, slack, c_low * nat1_lo, c_up * nat1_hi, lo_corr, up_corr)
