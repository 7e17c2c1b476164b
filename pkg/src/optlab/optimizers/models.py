"""Stochastic models ``f_x(., xi)`` for model-based methods.

Two families are provided.  :class:`OracleSubgradientModel` wraps an ABC
gradient oracle, so the sample ``xi`` is the realized stochastic gradient and
the model is affine.  :class:`FiniteSampleModel` draws ``xi`` uniformly from a
finite list of sample losses, either ``|c(x, xi)|`` with smooth ``c`` or
smooth losses, and supports all three model types where they make sense.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..problems import AbcOracle, FiniteSumObjective, sample_gradient
from ..regularizers import Regularizer, prox_eval
from ..rng import RngStream

__all__ = [
    "MODEL_TYPES",
    "AbsCompositeSample",
    "SmoothSample",
    "SampleAverageObjective",
    "AbsMonomialAverage",
    "OracleSubgradientModel",
    "FiniteSampleModel",
    "smm_subproblem",
    "build_smm_problem",
    "SMM_CATALOG",
]

MODEL_TYPES = ("subgradient", "proximal_point", "prox_linear")
INNER_TOL = 1e-10
INNER_MAX = 100_000


@dataclass(frozen=True)
class AbsCompositeSample:
    """``f(x) = |c(x)|`` with ``c`` scalar-valued and smooth.

    ``curvature`` bounds the Lipschitz modulus of ``grad c`` and hence the
    weak-convexity constant of ``|c|``.
    """

    c: Callable[[np.ndarray], float]
    grad_c: Callable[[np.ndarray], np.ndarray]
    curvature: float

    def value(self, x):
        return abs(self.c(x))

    def subgradient(self, x):
        v = self.c(x)
        return np.sign(v) * self.grad_c(x)

    def right_derivative(self, x):
        # one-dimensional only: d/dy |c(y)| from the right
        v = self.c(x)
        d = self.grad_c(x)
        return np.where(v > 0, d, np.where(v < 0, -d, np.abs(d)))


@dataclass(frozen=True)
class SmoothSample:
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: float

    def subgradient(self, x):
        return self.gradient(x)

    def right_derivative(self, x):
        return self.gradient(x)


@dataclass(frozen=True)
class SampleAverageObjective:
    """``f(x) = mean_i f(x, xi_i)`` for nonsmooth samples."""

    samples: tuple
    weak_convexity: float
    dim: int = 1
    lower_bound: float = 0.0
    smooth: bool = False

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.mean([s.value(x) for s in self.samples]))

    def right_derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.mean([s.right_derivative(x) for s in self.samples], axis=0)


@dataclass(frozen=True)
class AbsMonomialAverage:
    """``f(x) = mean_i |coef_i x^power - b_i|`` on the real line, vectorized."""

    coef: np.ndarray
    b: np.ndarray
    power: int
    weak_convexity: float
    dim: int = 1
    lower_bound: float = 0.0
    smooth: bool = False

    def value(self, x) -> float:
        t = float(np.asarray(x).reshape(-1)[0])
        return float(np.mean(np.abs(self.coef * t ** self.power - self.b)))

    def right_derivative(self, x) -> np.ndarray:
        return self.right_derivative_grid(np.asarray(x, dtype=float).reshape(-1)[:1])

    def right_derivative_grid(self, t: np.ndarray) -> np.ndarray:
        """Right derivative at each entry of a 1-D array of points."""
        t = np.asarray(t, dtype=float)[:, None]
        c = self.coef * t ** self.power - self.b
        d = self.power * self.coef * t ** (self.power - 1)
        return np.mean(np.where(c > 0, d, np.where(c < 0, -d, np.abs(d))), axis=1)


@dataclass(frozen=True)
class OracleSubgradientModel:
    """``f_x(y, xi) = f(x) + <g, y - x>`` with ``g`` drawn from an ABC oracle."""

    oracle: AbcOracle
    model_type: str = "subgradient"

    def __post_init__(self):
        if self.model_type != "subgradient":
            raise ValueError("an oracle only supports the subgradient model")

    @property
    def objective(self):
        return self.oracle.base

    @property
    def tau(self) -> float:
        return float(self.oracle.base.lipschitz)

    def eta(self, phi: Regularizer) -> float:
        return phi.tau

    @property
    def lipschitz(self) -> float:
        return np.inf

    def draw(self, x, rng: RngStream):
        return sample_gradient(self.oracle, x, rng)

    def model_value(self, x, y, xi) -> float:
        return float(self.oracle.base.value(x) + xi @ (y - x))


@dataclass(frozen=True)
class FiniteSampleModel:
    """Uniform sampling over ``samples`` with a chosen model type.

    Parameters
    ----------
    samples : sequence
        :class:`AbsCompositeSample` or :class:`SmoothSample` entries.
    model_type : str
        ``subgradient``, ``proximal_point`` or ``prox_linear`` (the latter for
        absolute-value composites only).
    objective : object
        The population objective (sample average); used for the envelope.
    tau, eta_f, lipschitz : float
        One-sided accuracy, weak convexity of ``f_x(., xi)`` alone, and the
        model Lipschitz constant.
    """

    samples: tuple
    model_type: str
    objective: object
    tau: float
    eta_f: float
    lipschitz: float
    name: str = ""
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.model_type not in MODEL_TYPES:
            raise ValueError(f"unknown model type {self.model_type!r}")
        if self.model_type == "prox_linear" and not all(isinstance(s, AbsCompositeSample) for s in self.samples):
            raise ValueError("prox_linear needs composite |c(x)| samples")

    def eta(self, phi: Regularizer) -> float:
        return self.eta_f + phi.tau

    def draw(self, x, rng: RngStream) -> int:
        return int(rng.integers(0, len(self.samples)))

    def model_value(self, x, y, xi) -> float:
        s = self.samples[xi]
        if self.model_type == "subgradient":
            return float(s.value(x) + s.subgradient(x) @ (y - x))
        if self.model_type == "proximal_point":
            return float(s.value(y))
        return float(abs(s.c(x) + s.grad_c(x) @ (y - x)))


def _prox_linear_abs(s: AbsCompositeSample, phi, alpha, x):
    # min_y |c + <v, y - x>| + phi(y) + |y - x|^2/(2 alpha); dual variable t in [-1, 1]
    c0, v = s.c(x), s.grad_c(x)

    def y_of(t):
        return prox_eval(phi, alpha, x - alpha * t * v)

    def r(t):
        return c0 + v @ (y_of(t) - x)

    if r(1.0) >= 0:
        return y_of(1.0)
    if r(-1.0) <= 0:
        return y_of(-1.0)
    lo, hi = -1.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if r(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15:
            break
    return y_of(0.5 * (lo + hi))


def _bisect_1d(dF, x0, tol=1e-15):
    lo, hi, w = x0, x0, 1.0
    while dF(lo) >= 0:
        lo = x0 - w
        w *= 2
    w = 1.0
    while dF(hi) < 0:
        hi = x0 + w
        w *= 2
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol * (1 + abs(x0)):
            break
        if dF(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return lo, hi


def _proximal_point(s, phi, alpha, x):
    if isinstance(s, SmoothSample):
        beta = 1.0 / (s.lipschitz + 1.0 / alpha + phi.tau)
        y = prox_eval(phi, alpha, x) if phi.tau * alpha < 1 else x.copy()
        for _ in range(INNER_MAX):
            y_new = prox_eval(phi, beta, y - beta * (s.gradient(y) + (y - x) / alpha))
            done = np.linalg.norm(y_new - y) <= INNER_TOL
            y = y_new
            if done:
                return y
        raise RuntimeError("proximal point inner solver did not converge")
    if x.shape[0] != 1:
        raise ValueError("proximal point on composite samples is one-dimensional only")
    x0 = float(x[0])

    def dF(t):
        yy = np.array([t])
        return float(s.right_derivative(yy)[0] + phi.coord_right_derivative(yy)[0]) + (t - x0) / alpha

    lo, hi = _bisect_1d(dF, x0)
    cand = [np.array([lo]), np.array([hi])]
    vals = [s.value(c) + phi.value(c) + (c[0] - x0) ** 2 / (2 * alpha) for c in cand]
    return cand[int(np.argmin(vals))]


def smm_subproblem(model, phi: Regularizer, alpha: float, x_k, xi) -> np.ndarray:
    """``argmin_y f_{x_k}(y, xi) + phi(y) + |y - x_k|^2 / (2 alpha)``.

    Requires ``alpha < 1/(2 eta)`` where ``eta`` is the weak-convexity constant
    of ``f_{x_k}(., xi) + phi``.
    """
    alpha = float(alpha)
    eta = model.eta(phi)
    if eta > 0 and alpha >= 0.5 / eta:
        raise ValueError(f"alpha={alpha} >= 1/(2 eta)={0.5 / eta}")
    x = np.asarray(x_k, dtype=float)
    if isinstance(model, OracleSubgradientModel):
        return prox_eval(phi, alpha, x - alpha * xi)
    s = model.samples[xi]
    if model.model_type == "subgradient":
        return prox_eval(phi, alpha, x - alpha * s.subgradient(x))
    if model.model_type == "prox_linear":
        return _prox_linear_abs(s, phi, alpha, x)
    return _proximal_point(s, phi, alpha, x)


def _data_1d(params, default_m):
    if "a" in params:
        a = np.asarray(params["a"], dtype=float).reshape(-1)
        b = np.asarray(params["b"], dtype=float).reshape(-1)
        if a.shape != b.shape:
            raise ValueError("a and b must have equal length")
    else:
        m = int(params.get("m", default_m))
        g = np.random.default_rng(int(params.get("data_seed", 0)))
        a = g.uniform(0.5, 1.5, m) * g.choice([-1.0, 1.0], m)
        x_true = float(params.get("x_true", 1.0))
        b = a * x_true
        out = g.random(m) < float(params.get("outlier_frac", 0.25))
        b = np.where(out, b + g.normal(0, 3.0, m), b)
    if a.size == 0:
        raise ValueError("need at least one sample")
    return a, b


def _robust_regression_1d(params, model_type):
    """``f(x, i) = |a_i x - b_i|``: convex, so prox-linear equals proximal point."""
    a, b = _data_1d(params, 8)
    samples = tuple(AbsCompositeSample(lambda x, ai=ai, bi=bi: float(ai * x[0] - bi),
                                       lambda x, ai=ai: np.array([ai]), 0.0)
                    for ai, bi in zip(a, b))
    obj = AbsMonomialAverage(a, b, 1, 0.0)
    L = float(np.max(np.abs(a)))
    return FiniteSampleModel(samples, model_type, obj, 0.0, 0.0, L, "robust_regression_1d",
                             {"a": a, "b": b})


def _phase_retrieval_1d(params, model_type):
    """``f(x, i) = |a_i^2 x^2 - b_i|``, weakly convex with constant ``2 max a_i^2``."""
    if "a" not in params:
        m = int(params.get("m", 8))
        g = np.random.default_rng(int(params.get("data_seed", 0)))
        a = g.uniform(0.5, 1.5, m)
        x_true = float(params.get("x_true", 1.0))
        b = (a * x_true) ** 2
        out = g.random(m) < float(params.get("outlier_frac", 0.25))
        b = np.where(out, b + np.abs(g.normal(0, 2.0, m)), b)
    else:
        a, b = _data_1d(params, 8)
    rho = 2.0 * float(np.max(a * a))
    samples = tuple(AbsCompositeSample(lambda x, ai=ai, bi=bi: float(ai * ai * x[0] ** 2 - bi),
                                       lambda x, ai=ai: np.array([2 * ai * ai * x[0]]), 2 * ai * ai)
                    for ai, bi in zip(a, b))
    obj = AbsMonomialAverage(a * a, b, 2, rho)
    if model_type == "proximal_point":
        tau, eta_f = 0.0, rho
    elif model_type == "prox_linear":
        tau, eta_f = rho, 0.0
    else:
        tau, eta_f = rho, rho
    # the model is only locally Lipschitz since |grad c| grows with |x|
    return FiniteSampleModel(samples, model_type, obj, tau, eta_f, np.inf, "phase_retrieval_1d",
                             {"a": a, "b": b})


def finite_sum_model(fs: FiniteSumObjective, model_type: str) -> FiniteSampleModel:
    """Smooth components of a finite sum as model samples."""
    if model_type == "prox_linear":
        raise ValueError("prox_linear needs composite samples")
    samples = tuple(SmoothSample(c.value, c.gradient, c.lipschitz) for c in fs.components)
    L = fs.lipschitz
    tau = L if model_type == "subgradient" else 0.0
    eta_f = 0.0 if model_type == "subgradient" else L
    return FiniteSampleModel(samples, model_type, fs, tau, eta_f, np.inf, fs.name)


SMM_CATALOG: dict[str, Callable] = {
    "robust_regression_1d": _robust_regression_1d,
    "phase_retrieval_1d": _phase_retrieval_1d,
}


def build_smm_problem(spec: Mapping, model_type: str) -> FiniteSampleModel:
    name = spec.get("name")
    if name not in SMM_CATALOG:
        raise ValueError(f"unknown model-based problem {name!r}; choose from {sorted(SMM_CATALOG)}")
    if model_type not in MODEL_TYPES:
        raise ValueError(f"unknown model type {model_type!r}")
    params = {k: v for k, v in spec.items() if k != "name"}
    return SMM_CATALOG[name](params, model_type)
