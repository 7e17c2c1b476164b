"""SGD, random reshuffling, prox-SGD and stochastic model-based methods."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..problems import AbcOracle, FiniteSumObjective, sample_gradient
from ..regularizers import prox_eval
from ..rng import RngStream
from ..stationarity import (CompositeProblem, default_alpha, default_theta, moreau_prox,
                            natural_residual)
from .models import OracleSubgradientModel, smm_subproblem
from .schedules import Schedule
from .trace import DIVERGENCE_NORM, Trace, default_stride, measure_mask

__all__ = ["run_sgd", "run_rr", "rr_epoch", "run_prox_sgd", "run_smm", "smm_theta", "ENV_TOL"]

ENV_TOL = 1e-10


def _run_loop(method: str, x0, T: int, alphas: np.ndarray, step: Callable, obj_fn: Callable,
              measure_fn: Callable, mask: np.ndarray, extra_names: tuple, rng: RngStream,
              offset: int = 0, warnings: list | None = None,
              snapshot_stride: int | None = None) -> Trace:
    T = int(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    x = np.array(x0, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite starting point")
    obj = np.full(T + 1, np.nan)
    meas = np.full(T + 1, np.nan)
    steps = np.full(T + 1, np.nan)
    extras = {name: np.full(T + 1, np.nan) for name in extra_names}
    snaps = {}
    diverged = False
    last = T
    for k in range(T + 1):
        obj[k] = obj_fn(x)
        if mask[k]:
            m, ex = measure_fn(x)
            meas[k] = m
            for name, v in ex.items():
                extras[name][k] = v
        if snapshot_stride and k % snapshot_stride == 0:
            snaps[k] = x.copy()
        if k == T:
            break
        x_new = step(k, x, alphas[k])
        if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > DIVERGENCE_NORM:
            diverged = True
            last = k
            break
        steps[k] = float(np.linalg.norm(x_new - x))
        x = x_new
    n = last + 1
    return Trace(method, np.arange(n), alphas[:n].copy(), obj[:n], meas[:n], steps[:n], x,
                 seed=rng.seed, replication=rng.replication_index, diverged=diverged,
                 offset=offset, warnings=list(warnings or []),
                 extras={k: v[:n] for k, v in extras.items()}, snapshots=snaps)


def _alphas(s: Schedule, T: int, offset: int = 0) -> np.ndarray:
    return np.array([s.value(k + offset) for k in range(T + 1)])


def _mask(T, stride, cheap):
    return measure_mask(T, 1 if (stride is None and cheap) else stride)


def run_sgd(obj, oracle: AbcOracle, s: Schedule, x0, T: int, rng: RngStream,
            stride: int | None = None, snapshot_stride: int | None = None) -> Trace:
    """``x^{k+1} = x^k - alpha_k g^k``; the measure is the true ``||grad f(x^k)||``."""
    if oracle.base is not obj:
        raise ValueError("oracle is not built over the given objective")
    warn = [] if "sum_sq_finite" in s.declared_properties else ["schedule is not square-summable"]

    def step(k, x, a):
        return x - a * sample_gradient(oracle, x, rng)

    return _run_loop("sgd", x0, T, _alphas(s, T), step, obj.value,
                     lambda x: (float(np.linalg.norm(obj.gradient(x))), {}),
                     _mask(T, stride, True), (), rng, 0, warn, snapshot_stride)


def rr_epoch(fs: FiniteSumObjective, x, alpha: float, perm) -> np.ndarray:
    """One reshuffling epoch: ``N`` sequential component steps in ``perm`` order."""
    y = np.asarray(x, dtype=float)
    for i in perm:
        y = y - alpha * fs.component_gradient(y, int(i))
    return y


def run_rr(fs: FiniteSumObjective, s: Schedule, x0, T_epochs: int, rng: RngStream,
           stride: int | None = None, snapshot_stride: int | None = None) -> Trace:
    """Random reshuffling with a fresh Fisher-Yates permutation per epoch."""
    if not isinstance(fs, FiniteSumObjective):
        raise ValueError("random reshuffling needs a finite-sum objective")
    warn = [] if "sum_cube_finite" in s.declared_properties else ["schedule is not cube-summable"]

    def step(k, x, a):
        return rr_epoch(fs, x, a, rng.permutation(fs.N))

    return _run_loop("rr", x0, T_epochs, _alphas(s, T_epochs), step, fs.value,
                     lambda x: (float(np.linalg.norm(fs.gradient(x))), {}),
                     _mask(T_epochs, stride, True), (), rng, 0, warn, snapshot_stride)


def _offset(s: Schedule, cap: float) -> int:
    return 0 if not np.isfinite(cap) else s.first_admissible(cap)


def run_prox_sgd(cp: CompositeProblem, oracle: AbcOracle, s: Schedule, x0, T: int, rng: RngStream,
                 theta: float | None = None, alpha_nat: float | None = None,
                 alpha_cap: float | None = None, stride: int | None = None,
                 env_tol: float = ENV_TOL, snapshot_stride: int | None = None,
                 measure: str = "env_grad") -> Trace:
    """``x^{k+1} = prox_{alpha_k phi}(x^k - alpha_k g^k)``.

    The schedule is skipped forward until ``alpha_k <= 1/(2 tau)`` (and
    ``<= alpha_cap`` if given).  The measure is ``||grad env_{theta psi}||``;
    extras hold the envelope value and ``||F_nat^alpha||``.  With
    ``measure="nat_residual"`` the two norms swap roles.
    """
    if measure not in ("env_grad", "nat_residual"):
        raise ValueError(f"unknown measure {measure!r}")
    if oracle.base is not cp.f:
        raise ValueError("oracle is not built over the composite problem's f")
    phi = cp.phi
    warn = []
    if not phi.lipschitz_finite:
        warn.append("regularizer is not Lipschitz; outside the analyzed setting")
    cap = 0.5 / phi.tau if phi.tau > 0 else np.inf
    if alpha_cap is not None:
        cap = min(cap, float(alpha_cap))
    off = _offset(s, cap)
    theta = default_theta(cp) if theta is None else float(theta)
    a_nat = default_alpha(cp) if alpha_nat is None else float(alpha_nat)

    def step(k, x, a):
        return prox_eval(phi, a, x - a * sample_gradient(oracle, x, rng))

    def measure_fn(x):
        e = moreau_prox(cp, theta, x, env_tol)
        g = float(np.linalg.norm(e.env_grad))
        nat = float(np.linalg.norm(natural_residual(cp, a_nat, x)))
        if measure == "env_grad":
            return g, {"env": e.env_value, "nat": nat}
        return nat, {"env": e.env_value, "env_grad": g}

    names = ("env", "nat") if measure == "env_grad" else ("env", "env_grad")
    tr = _run_loop("prox_sgd", x0, T, _alphas(s, T, off), step, cp.value, measure_fn,
                   _mask(T, stride, False), names, rng, off, warn, snapshot_stride)
    tr.meta = {"theta": theta, "alpha_nat": a_nat, "measure": measure}
    return tr


def smm_theta(model, phi) -> float:
    return 1.0 / (2.0 * (model.tau + model.eta(phi) + 1.0))


def run_smm(cp: CompositeProblem, model, s: Schedule, x0, T: int, rng: RngStream,
            theta: float | None = None, alpha_cap: float | None = None,
            stride: int | None = None, env_tol: float = ENV_TOL,
            snapshot_stride: int | None = None) -> Trace:
    """``x^{k+1} = argmin_y f_{x^k}(y, xi^k) + phi(y) + |y - x^k|^2/(2 alpha_k)``.

    The schedule is skipped forward until ``alpha_k <= 1/(2 eta)``.  The
    measure is ``||grad env_{theta psi}||`` with ``theta = 1/(2(tau+eta+1))``
    by default; extras hold the envelope value.
    """
    phi = cp.phi
    warn = []
    if not phi.lipschitz_finite:
        warn.append("regularizer is not Lipschitz; outside the analyzed setting")
    eta = model.eta(phi)
    # strict inequality alpha < 1/(2 eta) is needed by the subproblem
    cap = np.nextafter(0.5 / eta, 0.0) if eta > 0 else np.inf
    if alpha_cap is not None:
        cap = min(cap, float(alpha_cap))
    off = _offset(s, cap)
    theta = smm_theta(model, phi) if theta is None else float(theta)

    def step(k, x, a):
        return smm_subproblem(model, phi, a, x, model.draw(x, rng))

    def measure(x):
        e = moreau_prox(cp, theta, x, env_tol)
        return float(np.linalg.norm(e.env_grad)), {"env": e.env_value}

    tr = _run_loop("smm", x0, T, _alphas(s, T, off), step, cp.value, measure,
                   _mask(T, stride, False), ("env",), rng, off, warn, snapshot_stride)
    tr.meta = {"theta": theta, "model_type": model.model_type,
                      "oracle_model": isinstance(model, OracleSubgradientModel)}
    return tr
