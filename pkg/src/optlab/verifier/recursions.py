"""Robbins-Siegmund style recursion checks.

Each named recursion has the shape ``lhs_k <= scale * rhs_k`` with
``rhs_k = (1 + beta_k) y_k - p_k + q_k``, where ``y`` is a Lyapunov quantity
(objective gap or envelope gap), ``p_k`` a decrement and ``q_k`` an error term.
For descent recursions ``lhs_k = y_{k+1}``; for step-length bounds
``lhs_k = |x^{k+1} - x^k|^2`` and ``y`` is the gap that multiplies ``alpha_k^2``.
Expectations are taken in total form: per-replication residuals
``lhs_k - scale rhs_k`` are averaged and compared with five standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ensemble import MIN_REPLICATIONS, Ensemble, jackknife_stderr
from .reports import FAIL, INCONCLUSIVE, PASS, SKIPPED, ConditionReport

__all__ = ["RecursionSpec", "RecursionTerms", "RECURSIONS", "recursion_spec", "check_recursion"]


@dataclass
class RecursionTerms:
    lyapunov: np.ndarray      # R x (T+1)
    multiplier: np.ndarray    # T, equals 1 + beta_k
    decrement: np.ndarray     # R x T
    error: np.ndarray         # T
    lhs: np.ndarray           # R x T
    eligible: np.ndarray      # T, bool

    def rhs(self) -> np.ndarray:
        return self.multiplier * self.lyapunov[:, :-1] - self.decrement + self.error


@dataclass(frozen=True)
class RecursionSpec:
    """A named recursion with its constants and an RHS scale (1 = as stated)."""

    name: str
    method: str
    terms: Callable[[Ensemble, dict], RecursionTerms] = field(repr=False, compare=False)
    required: tuple = ()
    scale: float = 1.0

    def scaled(self, scale: float) -> "RecursionSpec":
        return RecursionSpec(self.name, self.method, self.terms, self.required, float(scale))


def _cols(ens, *names):
    return [ens.column(n) for n in names]


def _sgd_descent(ens, c):
    # E[f_{k+1} - fbar] <= (1 + L C a^2/2)(f_k - fbar) - a(1 - L a/2)|grad f|^2 + L D a^2/2
    obj, meas = _cols(ens, "obj", "measure")
    a = ens.alpha[:-1]
    L, C, D = c["L"], c["C"], c["D"]
    y = obj - c["f_lower"]
    return RecursionTerms(y, 1 + L * C * a ** 2 / 2, a * (1 - L * a / 2) * meas[:, :-1] ** 2,
                          L * D * a ** 2 / 2, y[:, 1:], np.ones(a.shape, bool))


def _rr_descent(ens, c):
    # f_{k+1} - fbar <= (1 + 2 L^3 N^3 a^3)(f_k - fbar) - (N a/2)|grad f|^2
    #                   - (1 - L N a)/(2 N a) |x^{k+1} - x^k|^2,   a < 1/(sqrt 2 L N)
    obj, meas, step = _cols(ens, "obj", "measure", "step_len")
    a = ens.alpha[:-1]
    L, N = c["L"], c["N"]
    y = obj - c["f_lower"]
    dec = N * a / 2 * meas[:, :-1] ** 2 + (1 - L * N * a) / (2 * N * a) * step[:, :-1] ** 2
    return RecursionTerms(y, 1 + 2 * L ** 3 * N ** 3 * a ** 3, dec, np.zeros_like(a), y[:, 1:],
                          a < 1.0 / (np.sqrt(2.0) * L * N))


def _psgd_cap(c, th):
    L, tau = c["L"], c["tau"]
    caps = [np.inf if tau == 0 else 1 / (2 * tau)]
    w = 1 / th - (L + tau)
    caps.append(1 / (2 * w) if w > 0 else np.inf)
    return min(caps)


def _prox_sgd_envelope(ens, c):
    # E[env_{k+1} - psibar] <= (1 + 4 C a^2/theta)(env_k - psibar) - L theta a |grad env|^2
    #                          + 2 a^2 (C Lphi^2 + D/theta)
    env, meas = _cols(ens, "env", "measure")
    a = ens.alpha[:-1]
    L, C, D, Lp, th, tau = c["L"], c["C"], c["D"], c["L_phi"], c["theta"], c["tau"]
    y = env - c["psi_lower"]
    elig = (a <= _psgd_cap(c, th)) & (th < 1 / (3 * L + tau))
    return RecursionTerms(y, 1 + 4 * C * a ** 2 / th, L * th * a * meas[:, :-1] ** 2,
                          2 * a ** 2 * (C * Lp ** 2 + D / th), y[:, 1:], elig)


def _prox_sgd_step(ens, c):
    # E|x^{k+1} - x^k|^2 <= 8(2L + C) a^2 (env_k - psibar) + 4(((2L + C) theta + 1) Lphi^2 + D) a^2
    env, step = _cols(ens, "env", "step_len")
    a = ens.alpha[:-1]
    L, C, D, Lp, th, tau = c["L"], c["C"], c["D"], c["L_phi"], c["theta"], c["tau"]
    y = env - c["psi_lower"]
    elig = (a <= (np.inf if tau == 0 else 1 / (2 * tau))) & (th < 1 / (4 * L / 3 + tau))
    zeros = np.zeros_like(y[:, :-1])
    return RecursionTerms(y, 8 * (2 * L + C) * a ** 2, zeros,
                          4 * (((2 * L + C) * th + 1) * Lp ** 2 + D) * a ** 2, step[:, :-1] ** 2, elig)


def _smm_envelope(ens, c):
    # E[env_{k+1}] <= env_k - (1 - (tau + eta) theta) a / (2 (1 - eta a)) |grad env|^2
    #                 + 2 L^2 a^2 / ((1 - eta a)(theta - a)),   a < theta
    env, meas = _cols(ens, "env", "measure")
    a = ens.alpha[:-1]
    Lm, tau, eta, th = c["L_model"], c["tau_model"], c["eta"], c["theta"]
    y = env - c["psi_lower"]
    elig = (a < th) & (th * (tau + eta) < 1) & (eta * a < 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dec = (1 - (tau + eta) * th) * a / (2 * (1 - eta * a)) * meas[:, :-1] ** 2
        err = np.where(elig, 2 * Lm ** 2 * a ** 2 / ((1 - eta * a) * (th - a)), np.inf)
    return RecursionTerms(y, np.ones_like(a), dec, err, y[:, 1:], elig)


def _smm_step(ens, c):
    # E|x^{k+1} - x^k|^2 <= (16 (L + Lphi)^2 + 8 L^2) a^2,   a <= 1/(2 eta)
    (step,) = _cols(ens, "step_len")
    a = ens.alpha[:-1]
    Lm, Lp, eta = c["L_model"], c["L_phi"], c["eta"]
    y = np.zeros((ens.R, a.size + 1))
    elig = a <= (np.inf if eta == 0 else 1 / (2 * eta))
    return RecursionTerms(y, np.zeros_like(a), np.zeros_like(y[:, :-1]),
                          (16 * (Lm + Lp) ** 2 + 8 * Lm ** 2) * a ** 2, step[:, :-1] ** 2, elig)


RECURSIONS = {
    "sgd_descent": RecursionSpec("sgd_descent", "sgd", _sgd_descent, ("L", "C", "D", "f_lower")),
    "rr_descent": RecursionSpec("rr_descent", "rr", _rr_descent, ("L", "N", "f_lower")),
    "prox_sgd_envelope": RecursionSpec("prox_sgd_envelope", "prox_sgd", _prox_sgd_envelope,
                                     ("L", "C", "D", "L_phi", "theta", "tau", "psi_lower")),
    "prox_sgd_step": RecursionSpec("prox_sgd_step", "prox_sgd", _prox_sgd_step,
                                     ("L", "C", "D", "L_phi", "theta", "tau", "psi_lower")),
    "smm_envelope": RecursionSpec("smm_envelope", "smm", _smm_envelope,
                                ("L_model", "tau_model", "eta", "theta", "psi_lower")),
    "smm_step": RecursionSpec("smm_step", "smm", _smm_step, ("L_model", "L_phi", "eta")),
}


def recursion_spec(name: str, scale: float = 1.0) -> RecursionSpec:
    if name not in RECURSIONS:
        raise ValueError(f"unknown recursion {name!r}; choose from {sorted(RECURSIONS)}")
    return RECURSIONS[name].scaled(scale)


def check_recursion(ens: Ensemble, spec: RecursionSpec | str, slack_se: float = 5.0,
                    min_frac: float = 0.99, constants: dict | None = None) -> ConditionReport:
    """Per-k test ``mean(lhs - scale rhs) <= slack_se * stderr`` over eligible ``k``."""
    if isinstance(spec, str):
        spec = recursion_spec(spec)
    cond = f"recursion:{spec.name}"
    if ens.method != spec.method:
        return ConditionReport(cond, SKIPPED, {}, None, ens.config_hash,
                               f"recursion {spec.name} applies to {spec.method}, not {ens.method}")
    c = dict(ens.constants)
    c.update(constants or {})
    missing = [k for k in spec.required if k not in c]
    if missing:
        return ConditionReport(cond, SKIPPED, {"missing": missing}, None, ens.config_hash,
                               "constants missing: " + ", ".join(missing))
    if any(not np.isfinite(c[k]) for k in spec.required):
        bad = [k for k in spec.required if not np.isfinite(c[k])]
        return ConditionReport(cond, SKIPPED, {"infinite": bad}, None, ens.config_hash,
                               "constants not finite: " + ", ".join(bad))
    tt = spec.terms(ens, c)
    rhs = tt.rhs()
    resid = tt.lhs - spec.scale * rhs
    finite = np.all(np.isfinite(resid), axis=0)
    elig = tt.eligible & finite
    ks = np.flatnonzero(elig)
    if ks.size == 0:
        return ConditionReport(cond, INCONCLUSIVE, {"n_eligible": 0}, None, ens.config_hash,
                               "no eligible k")
    r = resid[:, ks]
    mean = r.mean(axis=0)
    se = jackknife_stderr(r)
    ok = mean <= slack_se * se
    frac = float(ok.mean())
    stats = {"n_eligible": int(ks.size), "pass_fraction": frac, "scale": spec.scale,
             "max_standardized_excess": float(np.max(mean / np.where(se > 0, se, np.inf))),
             "failing_k": ks[~ok][:50], "mean_lhs": float(tt.lhs[:, ks].mean()),
             "mean_rhs": float(rhs[:, ks].mean())}
    if ens.R < MIN_REPLICATIONS:
        verdict = INCONCLUSIVE
    else:
        verdict = PASS if frac >= min_frac else FAIL
    return ConditionReport(cond, verdict, stats, (int(ks[0]), int(ks[-1])), ens.config_hash)
