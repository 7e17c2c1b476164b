"""A one-dimensional function on which gradient descent meets the usual
``min_k |f'(x^k)|^2 <= O(1/T^2)`` complexity bound while ``f'(x^k)`` does not
converge to zero.

``f = h + sum_j gamma_j`` where ``h`` is a quadratic on the right half-line and
each ``gamma_j`` is a smooth bump, equal to ``g(x) = x - x^2/2`` near
``1/(2j)`` and zero away from it.  Started at ``x = 1`` with alternating step
sizes, the iterates are exactly ``1/(k+1)``; every iterate with an even
denominator sits on a bump plateau where ``f' = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BumpFunction",
    "mollifier_c",
    "mollifier_c_prime",
    "cutoff_cbar",
    "cutoff_cbar_prime",
    "bump_index",
    "counterexample_f",
    "counterexample_grad",
    "alternating_step",
    "CounterexampleTrace",
    "run_counterexample",
    "counterexample_summary",
]

T_MAX = 10**6


@dataclass(frozen=True)
class BumpFunction:
    """The ``j``-th bump, supported on ``|x - 1/(2j)| < kappa``."""

    j: int

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("bump index starts at 1")

    @property
    def kappa(self) -> float:
        return 1.0 / (4 * self.j * (2 * self.j + 1))

    @property
    def nu(self) -> float:
        return 1.0 / (8 * self.j * (2 * self.j + 1))

    @property
    def center(self) -> float:
        return 1.0 / (2 * self.j)

    def value(self, x: float) -> float:
        d = x - self.center
        return _g(x) * cutoff_cbar(self.kappa, self.nu, d * d)

    def derivative(self, x: float) -> float:
        d = x - self.center
        s = d * d
        return _dg(x) * cutoff_cbar(self.kappa, self.nu, s) + _g(x) * cutoff_cbar_prime(self.kappa, self.nu, s) * 2 * d


def _g(x):
    return x - 0.5 * x * x


def _dg(x):
    return 1.0 - x


def mollifier_c(x: float) -> float:
    """``exp(-1/x)`` for ``x > 0`` and 0 otherwise (underflows gracefully)."""
    return math.exp(-1.0 / x) if x > 0 else 0.0


def mollifier_c_prime(x: float) -> float:
    if x <= 0:
        return 0.0
    e = math.exp(-1.0 / x)
    return e / (x * x) if e > 0 else 0.0


def _check_kn(kappa, nu):
    if not 0 <= nu < kappa:
        raise ValueError(f"need 0 <= nu < kappa, got nu={nu}, kappa={kappa}")


def cutoff_cbar(kappa: float, nu: float, x: float) -> float:
    """Smooth step: 1 for ``x <= nu^2``, 0 for ``x >= kappa^2``."""
    _check_kn(kappa, nu)
    k2, n2 = kappa * kappa, nu * nu
    if x <= n2:
        return 1.0
    if x >= k2:
        return 0.0
    a = mollifier_c(k2 - x)
    b = mollifier_c(x - n2)
    den = a + b
    if den == 0.0:
        # both tails underflowed; only possible for tiny intervals, use the nearer end
        return 1.0 if x - n2 < k2 - x else 0.0
    return a / den


def cutoff_cbar_prime(kappa: float, nu: float, x: float) -> float:
    _check_kn(kappa, nu)
    k2, n2 = kappa * kappa, nu * nu
    if x <= n2 or x >= k2:
        return 0.0
    a, b = mollifier_c(k2 - x), mollifier_c(x - n2)
    da, db = mollifier_c_prime(k2 - x), mollifier_c_prime(x - n2)
    den = a + b
    if den == 0.0:
        return 0.0
    return -(da * b + a * db) / (den * den)


def bump_index(x: float) -> int:
    """Index of the bump whose open support contains ``x``, or 0 if none."""
    if not x > 0:
        return 0
    j0 = int(round(1.0 / (2.0 * x)))
    for j in (j0 - 1, j0, j0 + 1):
        if j >= 1 and abs(x - 1.0 / (2 * j)) < 1.0 / (4 * j * (2 * j + 1)):
            return j
    return 0


def _h(x):
    return 0.5 * x * x if x >= 0 else 8 * x * x * (8 * x * x - 1)


def _dh(x):
    return x if x >= 0 else 256 * x ** 3 - 16 * x


def counterexample_f(x: float) -> float:
    x = float(x)
    if x == 0.0:
        return 0.0
    j = bump_index(x)
    return _h(x) + (BumpFunction(j).value(x) if j else 0.0)


def counterexample_grad(x: float) -> float:
    """Branchwise derivative; at ``x = 0`` returns ``h'(0) = 0``.

    ``f`` is not differentiable at 0 (the plateaus accumulate there), so the
    value at 0 is a convention.
    """
    x = float(x)
    if x == 0.0:
        return 0.0
    j = bump_index(x)
    return _dh(x) + (BumpFunction(j).derivative(x) if j else 0.0)


def alternating_step(k: int) -> float:
    """``1/(k+2)`` for even ``k`` and ``1/((k+1)(k+2))`` for odd ``k``."""
    return 1.0 / (k + 2) if k % 2 == 0 else 1.0 / ((k + 1) * (k + 2))


@dataclass(frozen=True)
class CounterexampleTrace:
    k: np.ndarray
    x: np.ndarray
    grad: np.ndarray
    alpha: np.ndarray
    obj: np.ndarray
    running_min_sq: np.ndarray

    @property
    def T(self) -> int:
        return int(self.k[-1])


def run_counterexample(T: int) -> CounterexampleTrace:
    """Gradient descent from ``x = 1`` with the alternating step sizes."""
    T = int(T)
    if not 1 <= T <= T_MAX:
        raise ValueError(f"T must be in [1, {T_MAX}]")
    xs = np.empty(T + 1)
    gs = np.empty(T + 1)
    al = np.empty(T + 1)
    fs = np.empty(T + 1)
    x = 1.0
    for k in range(T + 1):
        g = counterexample_grad(x)
        xs[k], gs[k], al[k], fs[k] = x, g, alternating_step(k), counterexample_f(x)
        x = x - al[k] * g
    return CounterexampleTrace(np.arange(T + 1), xs, gs, al, fs, np.minimum.accumulate(gs * gs))


def counterexample_summary(tr: CounterexampleTrace, tol: float = 1e-12) -> dict:
    """The three invariant verdicts plus which parity class carries ``|f'| = 1``."""
    k = tr.k
    exact_dev = float(np.max(np.abs(tr.x - 1.0 / (k + 1))))
    terms = [float(a * g * g) for a, g in zip(tr.alpha, tr.grad)]
    weighted = math.fsum(terms)
    bound = math.fsum(1.0 / ((i + 1) * (i + 2)) for i in range(len(k)))
    ones = {}
    for parity in (0, 1):
        sel = (k % 2 == parity) & (k >= 1)
        ones[parity] = bool(np.all(np.abs(np.abs(tr.grad[sel]) - 1.0) <= tol)) if np.any(sel) else False
    recip = {}
    for parity in (0, 1):
        sel = (k % 2 == parity) & (k >= 1)
        recip[parity] = bool(np.all(np.abs(np.abs(tr.grad[sel]) - 1.0 / (k[sel] + 1)) <= tol)) if np.any(sel) else False
    plateau = [p for p in (0, 1) if ones[p] and recip[1 - p]]
    T = tr.T
    return {
        "T": T,
        "max_iterate_deviation": exact_dev,
        "exact_iterates": exact_dev <= tol,
        "min_grad_sq": float(tr.running_min_sq[-1]),
        "complexity_bound": float(tr.running_min_sq[-1]) <= 1.0 / T ** 2,
        "weighted_grad_sum": weighted,
        "weighted_bound": bound,
        "summable": weighted <= bound + 1e-15 and weighted < 1.0,
        "plateau_parity": ("even" if plateau[0] == 0 else "odd") if plateau else None,
        "non_convergence": bool(plateau),
    }
