"""Weakly convex regularizers with proximity operators.

Every regularizer here except the box indicator is separable: its value is the
sum of a scalar penalty over coordinates and its prox acts coordinatewise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = ["Regularizer", "REGULARIZER_KINDS", "make_regularizer", "prox_eval"]

REGULARIZER_KINDS = ("mcp", "scad", "student_t", "l1", "zero", "box_indicator")

_NEWTON_TOL = 1e-12
_NEWTON_MAX = 200


@dataclass(frozen=True)
class Regularizer:
    """A proper, lsc, ``tau``-weakly convex function.

    Attributes
    ----------
    kind, params
        Catalog name and parameters.
    tau
        Weak-convexity constant.
    coord_lipschitz
        Lipschitz modulus of the scalar penalty (``inf`` for the indicator).
    lipschitz_Lphi
        Euclidean Lipschitz modulus on ``R^dim``; a separable sum of
        ``l``-Lipschitz scalar penalties is ``l * sqrt(dim)``-Lipschitz.
    lower_bound
        Infimum of the regularizer.
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    tau: float = 0.0
    coord_lipschitz: float = 0.0
    lower_bound: float = 0.0
    dim: int = 1

    @property
    def lipschitz_Lphi(self) -> float:
        return self.coord_lipschitz * np.sqrt(self.dim)

    @property
    def lipschitz_finite(self) -> bool:
        return bool(np.isfinite(self.coord_lipschitz))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def with_dim(self, dim: int) -> "Regularizer":
        return Regularizer(self.kind, self.params, self.tau, self.coord_lipschitz,
                           self.lower_bound * dim / self.dim if self.kind != "box_indicator" else 0.0,
                           int(dim))

    def domain_test(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind != "box_indicator":
            return bool(np.all(np.isfinite(x)))
        lo, hi = self.params["lo"], self.params["hi"]
        return bool(np.all((x >= lo) & (x <= hi)))

    def coord_value(self, x) -> np.ndarray:
        """Scalar penalty applied elementwise."""
        x = np.asarray(x, dtype=float)
        p = self.params
        a = np.abs(x)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "l1":
            return p["lam"] * a
        if self.kind == "mcp":
            lam, th = p["lam"], p["theta"]
            return np.where(a <= th * lam, lam * a - x * x / (2 * th), th * lam * lam / 2)
        if self.kind == "scad":
            lam, th = p["lam"], p["theta"]
            mid = (-x * x + 2 * th * lam * a - lam * lam) / (2 * (th - 1))
            return np.where(a <= lam, lam * a, np.where(a <= th * lam, mid, (th + 1) * lam * lam / 2))
        if self.kind == "student_t":
            th = p["theta"]
            return 0.5 * th * th * np.log1p((x / th) ** 2)
        if self.kind == "box_indicator":
            return np.where((x >= p["lo"]) & (x <= p["hi"]), 0.0, np.inf)
        raise AssertionError(self.kind)

    def value(self, x) -> float:
        return float(np.sum(self.coord_value(x)))

    def coord_right_derivative(self, x) -> np.ndarray:
        """Right derivative of the scalar penalty (finite-Lipschitz kinds only)."""
        x = np.asarray(x, dtype=float)
        p = self.params
        a = np.abs(x)
        s = np.where(x >= 0, 1.0, -1.0)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "l1":
            return s * p["lam"]
        if self.kind == "mcp":
            lam, th = p["lam"], p["theta"]
            return s * np.maximum(lam - a / th, 0.0)
        if self.kind == "scad":
            lam, th = p["lam"], p["theta"]
            # the slope in |x| is continuous, so one formula serves both sides
            d = np.where(a < lam, lam, np.where(a < th * lam, (th * lam - a) / (th - 1), 0.0))
            return s * d
        if self.kind == "student_t":
            th = p["theta"]
            return x / (1.0 + (x / th) ** 2)
        raise ValueError("right derivative undefined for the indicator")

    def prox(self, alpha: float, x) -> np.ndarray:
        return prox_eval(self, alpha, x)


def _positive(name, v):
    v = float(v)
    if not v > 0:
        raise ValueError(f"{name} must be positive, got {v}")
    return v


def make_regularizer(kind: str, params: Mapping | None = None, dim: int = 1) -> Regularizer:
    """Construct a catalog regularizer with its declared constants.

    Parameters
    ----------
    kind : str
        One of ``mcp``, ``scad``, ``student_t``, ``l1``, ``zero``, ``box_indicator``.
    params : mapping
        ``lam`` and ``theta`` for mcp/scad, ``theta`` for student_t, ``lam``
        for l1, ``lo`` and ``hi`` for the box.
    dim : int
        Ambient dimension, used for the Euclidean Lipschitz modulus.

    Examples
    --------
    >>> r = make_regularizer("mcp", {"lam": 1.0, "theta": 2.0})
    >>> r.tau, r.lipschitz_Lphi, r.value(np.array([5.0]))
    (0.5, 1.0, 1.0)
    """
    params = dict(params or {})
    dim = int(dim)
    if dim < 1:
        raise ValueError("dim must be positive")
    if kind == "zero":
        return Regularizer("zero", {}, 0.0, 0.0, 0.0, dim)
    if kind == "l1":
        lam = _positive("lam", params.get("lam", 1.0))
        return Regularizer("l1", {"lam": lam}, 0.0, lam, 0.0, dim)
    if kind == "mcp":
        lam = _positive("lam", params.get("lam", 1.0))
        th = _positive("theta", params.get("theta", 2.0))
        return Regularizer("mcp", {"lam": lam, "theta": th}, 1.0 / th, lam, 0.0, dim)
    if kind == "scad":
        lam = _positive("lam", params.get("lam", 1.0))
        th = float(params.get("theta", 3.7))
        if not th > 2:
            raise ValueError(f"SCAD needs theta > 2, got {th}")
        return Regularizer("scad", {"lam": lam, "theta": th}, 1.0 / (th - 1.0), lam, 0.0, dim)
    if kind == "student_t":
        th = float(params.get("theta", 1.0))
        if th == 0 or not np.isfinite(th):
            raise ValueError("student_t needs a finite nonzero theta")
        return Regularizer("student_t", {"theta": th}, 1.0 / 8.0, abs(th) / 2.0, 0.0, dim)
    if kind == "box_indicator":
        lo = float(params.get("lo", -1.0))
        hi = float(params.get("hi", 1.0))
        if not lo <= hi:
            raise ValueError("box needs lo <= hi")
        return Regularizer("box_indicator", {"lo": lo, "hi": hi}, 0.0, np.inf, 0.0, dim)
    raise ValueError(f"unknown regularizer {kind!r}; choose from {REGULARIZER_KINDS}")


def _argmin_candidates(reg: Regularizer, alpha: float, x: np.ndarray, cands: list) -> np.ndarray:
    C = np.stack(cands)
    obj = reg.coord_value(C) + (C - x) ** 2 / (2 * alpha)
    return C[np.argmin(obj, axis=0), np.arange(x.shape[0])]


def _prox_student_t(th: float, alpha: float, x: np.ndarray) -> np.ndarray:
    # root of g(y) = y - x + alpha * y / (1 + y^2/th^2), bracketed by 0 and x
    t2 = th * th
    lo = np.minimum(x, 0.0)
    hi = np.maximum(x, 0.0)
    y = x / (1.0 + alpha)
    for _ in range(_NEWTON_MAX):
        den = t2 + y * y
        g = y - x + alpha * t2 * y / den
        done = np.abs(g) <= _NEWTON_TOL * (1.0 + np.abs(x))
        if np.all(done):
            break
        lo = np.where(g < 0, y, lo)
        hi = np.where(g > 0, y, hi)
        dg = 1.0 + alpha * t2 * (t2 - y * y) / (den * den)
        step = y - g / dg
        bad = ~((step > lo) & (step < hi)) | (dg <= 0)
        y = np.where(done, y, np.where(bad, 0.5 * (lo + hi), step))
    return y


def prox_eval(reg: Regularizer, alpha: float, x) -> np.ndarray:
    """``argmin_y reg(y) + ||y - x||^2 / (2 alpha)``.

    Raises
    ------
    ValueError
        If ``alpha >= 1/tau`` (the prox may be set-valued) or ``x`` is not finite.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if reg.tau > 0 and alpha * reg.tau >= 1.0:
        raise ValueError(f"alpha={alpha} >= 1/tau={1 / reg.tau}; prox may be set-valued")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite prox argument")
    p = reg.params
    k = reg.kind
    if k == "zero":
        out = x.copy()
    elif k == "l1":
        out = np.sign(x) * np.maximum(np.abs(x) - alpha * p["lam"], 0.0)
    elif k == "box_indicator":
        out = np.clip(x, p["lo"], p["hi"])
    elif k == "mcp":
        lam, th = p["lam"], p["theta"]
        r = th * lam
        inner = (np.abs(x) - alpha * lam) / (1.0 - alpha / th)
        inner = np.sign(x) * np.clip(inner, 0.0, r)
        z = np.zeros_like(x)
        out = _argmin_candidates(reg, alpha, x, [z, inner, x, z + r, z - r])
    elif k == "scad":
        lam, th = p["lam"], p["theta"]
        a = np.abs(x)
        s = np.where(x >= 0, 1.0, -1.0)
        soft = s * np.clip(a - alpha * lam, 0.0, lam)
        mid = s * np.clip((a * (th - 1) - alpha * th * lam) / ((th - 1) - alpha), lam, th * lam)
        z = np.zeros_like(x)
        out = _argmin_candidates(reg, alpha, x,
                                 [z, soft, mid, x, s * lam, s * th * lam])
    elif k == "student_t":
        out = _prox_student_t(p["theta"], alpha, x)
    else:
        raise AssertionError(k)
    return out[0] if scalar else out
