"""Smooth objectives, finite sums, ABC gradient oracles and the test catalog."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .rng import RngStream

__all__ = [
    "SmoothObjective",
    "FiniteSumObjective",
    "AbcOracle",
    "NOISE_KINDS",
    "CATALOG",
    "build_problem",
    "sample_gradient",
    "largest_eigenvalue",
]

NOISE_KINDS = ("gaussian_isotropic", "bounded_uniform", "zero")
MAX_DIM = 100


@dataclass(frozen=True)
class SmoothObjective:
    """A function with ``lipschitz``-Lipschitz gradient bounded below by ``lower_bound``."""

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lower_bound: float
    lipschitz: float
    name: str = ""
    params: Mapping = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class FiniteSumObjective:
    """``f(x) = (1/N) sum_i f(x, i)`` with a common lower bound and modulus."""

    components: tuple[SmoothObjective, ...]
    name: str = ""
    params: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.components:
            raise ValueError("a finite sum needs at least one component")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError("components must share a dimension")

    @property
    def N(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def lower_bound(self) -> float:
        return min(c.lower_bound for c in self.components)

    @property
    def lipschitz(self) -> float:
        return max(c.lipschitz for c in self.components)

    def value(self, x: np.ndarray) -> float:
        return sum(c.value(x) for c in self.components) / self.N

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.dim)
        for c in self.components:
            g += c.gradient(x)
        return g / self.N

    def component_gradient(self, x: np.ndarray, i: int) -> np.ndarray:
        return self.components[i].gradient(x)


@dataclass(frozen=True)
class AbcOracle:
    """Unbiased gradient oracle whose noise satisfies the ABC bound with equality.

    ``E||g - grad f(x)||^2 = C (f(x) - f_lower) + D`` for the two random noise
    kinds; ``zero`` returns the exact gradient.
    """

    base: SmoothObjective | FiniteSumObjective
    C: float = 0.0
    D: float = 0.0
    noise_kind: str = "gaussian_isotropic"

    def __post_init__(self):
        if self.C < 0 or self.D < 0:
            raise ValueError("C and D must be nonnegative")
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")

    def noise_variance(self, x: np.ndarray) -> float:
        gap = self.base.value(x) - self.base.lower_bound
        scale = 1e-12 * (1.0 + abs(self.base.lower_bound))
        if gap < -scale:
            raise ValueError(f"value below declared lower bound by {-gap:.3e}")
        var = self.C * max(gap, 0.0) + self.D
        assert var >= 0.0
        return var


def sample_gradient(oracle: AbcOracle, x: np.ndarray, rng: RngStream) -> np.ndarray:
    """One stochastic gradient at ``x``; consumes one counter value of ``rng``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite point")
    grad = oracle.base.gradient(x)
    n = grad.shape[0]
    if oracle.noise_kind == "zero" or (oracle.C == 0.0 and oracle.D == 0.0):
        rng.counter += 1
        return grad
    sigma = np.sqrt(oracle.noise_variance(x))
    if oracle.noise_kind == "gaussian_isotropic":
        z = rng.normal(n)
    else:
        # uniform on [-sqrt3, sqrt3] has unit variance
        z = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), n)
    return grad + (sigma / np.sqrt(n)) * z


def largest_eigenvalue(M: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if not np.any(M):
        return 0.0
    v = np.random.default_rng(12345).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ M @ v)
    for _ in range(max_iter):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v_new = w / nw
        lam_new = float(v_new @ M @ v_new)
        resid = np.linalg.norm(M @ v_new - lam_new * v_new)
        v, converged = v_new, abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)) and resid <= np.sqrt(tol) * max(1.0, abs(lam_new))
        lam = lam_new
        if converged:
            break
    return lam


def _check_dim(n: int) -> int:
    n = int(n)
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"dimension must be in [1, {MAX_DIM}], got {n}")
    return n


def _quadratic(params: Mapping) -> SmoothObjective:
    if "Q" in params:
        Q = np.atleast_2d(np.asarray(params["Q"], dtype=float))
    elif "diag" in params:
        Q = np.diag(np.asarray(params["diag"], dtype=float))
    else:
        Q = float(params.get("scale", 1.0)) * np.eye(int(params.get("dim", 5)))
    n = _check_dim(Q.shape[0])
    if Q.shape != (n, n) or not np.allclose(Q, Q.T, atol=1e-12):
        raise ValueError("Q must be a symmetric square matrix")
    Q = 0.5 * (Q + Q.T)
    c = np.asarray(params.get("c", np.zeros(n)), dtype=float).reshape(-1)
    if c.shape != (n,):
        raise ValueError("c has the wrong length")
    evals = np.linalg.eigvalsh(Q)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(evals))))
    if evals[0] < -tol:
        raise ValueError("quadratic is not PSD, hence unbounded below")
    sol, *_ = np.linalg.lstsq(Q, -c, rcond=None)
    if np.linalg.norm(Q @ sol + c) > 1e-9 * (1.0 + np.linalg.norm(c)):
        raise ValueError("linear term outside the range of Q, hence unbounded below")
    f_lower = float(0.5 * sol @ Q @ sol + c @ sol)
    L = largest_eigenvalue(Q)
    if L <= 0.0:
        raise ValueError("zero quadratic has no positive Lipschitz modulus")

    def value(x):
        return float(0.5 * x @ (Q @ x) + c @ x)

    def gradient(x):
        return Q @ x + c

    return SmoothObjective(n, value, gradient, f_lower, L, "quadratic", {"Q": Q, "c": c})


def _least_squares(params: Mapping) -> SmoothObjective:
    A = np.atleast_2d(np.asarray(params["A"], dtype=float))
    b = np.asarray(params.get("b", np.zeros(A.shape[0])), dtype=float).reshape(-1)
    n = _check_dim(A.shape[1])
    if b.shape != (A.shape[0],):
        raise ValueError("b has the wrong length")
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    r = A @ sol - b
    f_lower = float(0.5 * r @ r)
    L = largest_eigenvalue(A.T @ A)
    if L <= 0.0:
        raise ValueError("A must be nonzero")

    def value(x):
        r = A @ x - b
        return float(0.5 * r @ r)

    def gradient(x):
        return A.T @ (A @ x - b)

    return SmoothObjective(n, value, gradient, f_lower, L, "least_squares", {"A": A, "b": b})


def _logistic_component(a: np.ndarray, y: float, reg: float) -> SmoothObjective:
    def value(x):
        m = -y * float(a @ x)
        return float(np.logaddexp(0.0, m) + 0.5 * reg * (x @ x))

    def gradient(x):
        m = -y * float(a @ x)
        s = 0.5 * (1.0 + np.tanh(0.5 * m))  # sigmoid(m), overflow-free
        return -y * s * a + reg * x

    return SmoothObjective(a.shape[0], value, gradient, 0.0, float(a @ a) / 4.0 + reg,
                           "logistic_component")


def _logistic_finite_sum(params: Mapping) -> FiniteSumObjective:
    if "features" in params:
        X = np.atleast_2d(np.asarray(params["features"], dtype=float))
        y = np.asarray(params["labels"], dtype=float).reshape(-1)
    else:
        N = int(params.get("N", 4))
        n = int(params.get("dim", 2))
        g = np.random.default_rng(int(params.get("data_seed", 0)))
        X = g.standard_normal((N, n))
        w = g.standard_normal(n)
        y = np.where(X @ w + 0.5 * g.standard_normal(N) >= 0.0, 1.0, -1.0)
    _check_dim(X.shape[1])
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be +1 or -1")
    reg = float(params.get("reg", 0.0))
    if reg < 0:
        raise ValueError("reg must be nonnegative")
    comps = tuple(_logistic_component(X[i], y[i], reg) for i in range(X.shape[0]))
    # common modulus across components
    L = max(c.lipschitz for c in comps)
    comps = tuple(SmoothObjective(c.dim, c.value, c.gradient, 0.0, L, c.name) for c in comps)
    return FiniteSumObjective(comps, "logistic_finite_sum", {"features": X, "labels": y, "reg": reg})


def _quadratic_finite_sum(params: Mapping) -> FiniteSumObjective:
    centers = np.asarray(params.get("centers", [[1.0], [-1.0]]), dtype=float)
    if centers.ndim == 1:
        centers = centers[:, None]
    _check_dim(centers.shape[1])
    scale = float(params.get("scale", 1.0))
    if scale <= 0:
        raise ValueError("scale must be positive")

    def component(ci):
        def value(x):
            d = x - ci
            return float(0.5 * scale * (d @ d))

        def gradient(x):
            return scale * (x - ci)

        return SmoothObjective(ci.shape[0], value, gradient, 0.0, scale, "shifted_quadratic")

    comps = tuple(component(ci.copy()) for ci in centers)
    return FiniteSumObjective(comps, "quadratic_finite_sum", {"centers": centers, "scale": scale})


def _rosenbrock_regularized(params: Mapping) -> SmoothObjective:
    """Chained valley ``0.5 (1 - x_1)^2 + b sum rho(x_{i+1} - q(x_i))``.

    ``rho`` and ``q`` are both ``t -> sqrt(1 + t^2) - 1``; their first
    derivatives are bounded by one, which keeps the gradient globally
    Lipschitz (unlike the classical Rosenbrock function).
    """
    n = _check_dim(params.get("dim", 2))
    if n < 2:
        raise ValueError("rosenbrock_regularized needs dim >= 2")
    b = float(params.get("b", 10.0))
    if b <= 0:
        raise ValueError("b must be positive")

    def soft(t):
        return np.sqrt(1.0 + t * t) - 1.0

    def dsoft(t):
        return t / np.sqrt(1.0 + t * t)

    def value(x):
        r = x[1:] - soft(x[:-1])
        return float(0.5 * (1.0 - x[0]) ** 2 + b * np.sum(soft(r)))

    def gradient(x):
        r = x[1:] - soft(x[:-1])
        w = b * dsoft(r)
        g = np.zeros(n)
        g[0] = -(1.0 - x[0])
        g[1:] += w
        g[:-1] -= w * dsoft(x[:-1])
        return g

    # each 2x2 link Hessian has norm <= 3b; links split into two block-diagonal groups
    L = 1.0 + 3.0 * b * min(2, n - 1)
    return SmoothObjective(n, value, gradient, 0.0, L, "rosenbrock_regularized", {"dim": n, "b": b})


CATALOG: dict[str, Callable[[Mapping], SmoothObjective | FiniteSumObjective]] = {
    "quadratic": _quadratic,
    "least_squares": _least_squares,
    "logistic_finite_sum": _logistic_finite_sum,
    "rosenbrock_regularized": _rosenbrock_regularized,
    "quadratic_finite_sum": _quadratic_finite_sum,
}


def build_problem(spec: Mapping | str) -> SmoothObjective | FiniteSumObjective:
    """Build a catalog objective from ``{"name": ..., **params}``.

    >>> f = build_problem({"name": "quadratic", "Q": [[1, 0], [0, 1]]})
    >>> f.lipschitz, f.lower_bound
    (1.0, 0.0)
    """
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    if name not in CATALOG:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(CATALOG)}")
    params = {k: v for k, v in spec.items() if k != "name"}
    return CATALOG[name](params)


def is_finite_sum(obj) -> bool:
    return isinstance(obj, FiniteSumObjective)


def as_components(obj) -> Sequence[SmoothObjective]:
    return obj.components if is_finite_sum(obj) else (obj,)
