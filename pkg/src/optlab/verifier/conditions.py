"""Statistical checks for the abstract convergence conditions.

Expectations are cross-replication means; the slack is five jackknife
standard errors unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..optimizers.schedules import Schedule
from ..rng import RngStream
from .ensemble import MIN_REPLICATIONS, Ensemble, jackknife_stderr
from .reports import FAIL, INCONCLUSIVE, PASS, ConditionReport, DecompositionReport

__all__ = [
    "MeasureSpec",
    "ConditionParams",
    "check_P1",
    "check_P2",
    "check_P3",
    "p4_violations",
    "p4prime_violations",
    "check_decomposition",
    "check_complexity_curve",
    "check_trend",
    "dyadic_points",
    "SLACK_SE",
]

SLACK_SE = 5.0


@dataclass(frozen=True)
class MeasureSpec:
    """Stationarity map ``Phi`` with declared modulus ``L_Phi`` and exponent ``a``."""

    phi: Callable[[np.ndarray], np.ndarray]
    L_phi: float
    a: float = 2.0


@dataclass(frozen=True)
class ConditionParams:
    a: float = 2.0
    b: float = 2.0
    q: float = 2.0
    p1: float = 2.0
    p2: float = 2.0
    A: float = 0.0
    B: float = 0.0


def dyadic_points(T: int, start: int = 1) -> list:
    out, p = [], 1
    while p <= T:
        if p >= start:
            out.append(p)
        p *= 2
    return out


def check_P1(ms: MeasureSpec, sampler: Callable[[RngStream], tuple], n_pairs: int = 100,
             rng: RngStream | None = None, rel_tol: float = 1e-6) -> ConditionReport:
    """Largest sampled ``|Phi(x) - Phi(y)| / |x - y|`` against ``L_Phi``."""
    if n_pairs < 100:
        raise ValueError("need at least 100 pairs")
    rng = rng or RngStream(0)
    best, witness = 0.0, None
    for _ in range(n_pairs):
        x, y = sampler(rng)
        d = float(np.linalg.norm(np.asarray(x) - np.asarray(y)))
        if d == 0:
            continue
        try:
            r = float(np.linalg.norm(np.asarray(ms.phi(x)) - np.asarray(ms.phi(y)))) / d
        except Exception as exc:  # pragma: no cover - surfaced to the caller
            raise RuntimeError(f"measure evaluation failed: {exc}") from exc
        if r > best:
            best, witness = r, (np.asarray(x).tolist(), np.asarray(y).tolist())
    ok = best <= ms.L_phi * (1.0 + rel_tol)
    stats = {"max_ratio": best, "declared_L": ms.L_phi, "n_pairs": n_pairs,
             "certified_lower_bound": best}
    if not ok:
        stats["witness"] = witness
    return ConditionReport("P1", PASS if ok else FAIL, stats)


def _partial_sums(mu: np.ndarray, vals: np.ndarray, logged: np.ndarray, T: int) -> np.ndarray:
    """Per-replication partial sums of ``mu_k v_k`` with linear interpolation between logged k."""
    ks = np.arange(T + 1)
    R = vals.shape[0]
    out = np.empty((R, T + 1))
    for i in range(R):
        v = np.interp(ks, logged, vals[i, logged])
        out[i] = np.cumsum(mu[: T + 1] * v)
    return out


def check_P2(ens: Ensemble, s: Schedule | None = None, a: float = 2.0,
             factor: float = 2.0) -> ConditionReport:
    """Cauchy surrogate for ``sum mu_k E|Phi(x^k)|^a < inf``.

    Increments ``S_{2^j} - S_{2^{j-1}}`` of the partial sums must shrink by
    ``factor`` across the last two dyadic windows.
    """
    logged = ens.logged("measure")
    T = int(logged[-1]) if logged.size else 0
    windows = dyadic_points(T)
    if len(windows) < 3:
        raise ValueError("fewer than 3 dyadic windows available")
    mu = ens.alpha
    vals = ens.column("measure") ** a
    S = _partial_sums(mu, vals, logged, T)
    inc = np.stack([S[:, w] - S[:, w // 2] for w in windows[1:]], axis=1)
    inc_mean = inc.mean(axis=0)
    last, prev = inc_mean[-1], inc_mean[-2]
    margin_samples = inc[:, -2] / factor - inc[:, -1]
    margin = float(np.mean(margin_samples))
    se = float(jackknife_stderr(margin_samples)) if ens.R > 1 else 0.0
    stats = {"windows": windows[1:], "increments": inc_mean, "last_increment": last,
             "previous_increment": prev, "factor": factor, "margin": margin, "margin_stderr": se,
             "partial_sum": float(S[:, -1].mean())}
    if ens.R > 1 and ens.R < MIN_REPLICATIONS:
        return ConditionReport("P2", INCONCLUSIVE, stats, (0, T), ens.config_hash,
                               f"fewer than {MIN_REPLICATIONS} replications")
    if se > 0 and se >= abs(margin):
        return ConditionReport("P2", INCONCLUSIVE, stats, (0, T), ens.config_hash,
                               "standard error dominates the increment margin")
    return ConditionReport("P2", PASS if margin >= 0 else FAIL, stats, (0, T), ens.config_hash)


def p4_violations(cp: ConditionParams, s: Schedule | None = None) -> list:
    v = []
    if cp.a < 1:
        v.append("a >= 1")
    if cp.q < 1:
        v.append("q >= 1")
    if cp.a < cp.b:
        v.append("a >= b")
    if cp.p1 < cp.q:
        v.append("p1 >= q")
    if cp.p2 < cp.q:
        v.append("p2 >= q")
    if s is not None and "sum_diverges" not in s.declared_properties:
        v.append("sum mu_k = inf")
    return v


def _sum_power_finite(s: Schedule, r: float) -> bool:
    if s.kind == "constant":
        return False
    if s.kind in ("inv_k_log",):
        return r >= 1
    if s.kind == "alternating_h":
        return r > 1
    return s.p * r > 1


def p4prime_violations(cp: ConditionParams, s: Schedule | None = None) -> list:
    v = []
    if cp.q < 2:
        v.append("q >= 2")
    if cp.q * cp.a < cp.b:
        v.append("q a >= b")
    if not cp.p1 > 0.5:
        v.append("p1 > 1/2")
    if cp.p2 < 1:
        v.append("p2 >= 1")
    if s is not None:
        if s.kind == "constant":
            v.append("mu_k -> 0")
        if "sum_diverges" not in s.declared_properties:
            v.append("sum mu_k = inf")
        if not _sum_power_finite(s, 2 * cp.p1):
            v.append("sum mu_k^(2 p1) < inf")
    return v


def check_P3(ens: Ensemble, cp: ConditionParams, s: Schedule | None = None,
             slack_se: float = SLACK_SE, min_frac: float = 0.99,
             relations: str = "P4") -> ConditionReport:
    """Per-k ``E|x^{k+1}-x^k|^q <= A mu^p1 + B mu^p2 E|Phi|^b`` plus parameter relations.

    ``relations="P4"`` checks the summable-step family (``a, q >= 1``,
    ``a >= b``, ``p1, p2 >= q``, ``sum mu = inf``); ``"P4prime"`` the
    vanishing-step family (``q >= 2``, ``q a >= b``, ``p1 > 1/2``, ``p2 >= 1``,
    ``mu -> 0``, ``sum mu^(2 p1) < inf``).  The report is named ``P3`` or
    ``P3prime`` accordingly.
    """
    if relations not in ("P4", "P4prime"):
        raise ValueError(f"relations must be P4 or P4prime, not {relations!r}")
    name = "P3" if relations == "P4" else "P3prime"
    viol = p4_violations(cp, s) if relations == "P4" else p4prime_violations(cp, s)
    if viol:
        return ConditionReport(name, FAIL, {"violations": viol}, None, ens.config_hash,
                               "parameter relations violated: " + ", ".join(viol))
    step = ens.column("step_len")
    meas = ens.column("measure")
    ks = np.flatnonzero(np.all(np.isfinite(step), axis=0) & np.all(np.isfinite(meas), axis=0))
    if ks.size == 0:
        raise ValueError("no k with both step length and measure logged")
    mu = ens.alpha[ks]
    resid = step[:, ks] ** cp.q - cp.B * mu ** cp.p2 * meas[:, ks] ** cp.b
    lhs = resid.mean(axis=0)
    rhs = cp.A * mu ** cp.p1
    se = jackknife_stderr(resid)
    ok = lhs <= rhs + slack_se * se
    frac = float(ok.mean())
    stats = {"n_k": int(ks.size), "pass_fraction": frac, "worst_excess": float(np.max(lhs - rhs - slack_se * se)),
             "params": cp.__dict__}
    verdict = _fraction_verdict(ens, frac, min_frac)
    return ConditionReport(name, verdict, stats, (int(ks[0]), int(ks[-1])), ens.config_hash)


def _fraction_verdict(ens, frac, min_frac):
    if ens.R < MIN_REPLICATIONS:
        return INCONCLUSIVE
    return PASS if frac >= min_frac else FAIL


def check_decomposition(step_fn: Callable, probes: Sequence, M: int, s: Schedule,
                        measure_fn: Callable | None = None, seed: int = 0, q: float = 2.0,
                        b: float = 0.0, p1: float = 1.0, p2: float = 1.0,
                        A_declared: float | None = None, ceiling: float = 1e6,
                        resampling: str = "oracle", slack_se: float = SLACK_SE,
                        offset: int = 0) -> DecompositionReport:
    """Estimate ``A_k`` and ``B_k`` by re-running one step ``M`` times from frozen states.

    Parameters
    ----------
    step_fn : callable
        ``step_fn(x, k, rng) -> x_next`` for iteration ``k``.
    probes : sequence of ``(k, x)``
    M : int
        Resamples per probe; split in halves so the conditional-mean estimate
        and the tested deviations are independent.
    """
    if M < 4:
        raise ValueError("need at least 4 resamples")
    n1 = M // 2
    mart_ok, mom_vals, ratios, B_est, details = True, [], [], [], []
    for j, (k, x) in enumerate(probes):
        x = np.asarray(x, dtype=float)
        mu = s.value(int(k) + offset)
        D = np.stack([step_fn(x, int(k), RngStream(seed, j, substream=(m,))) - x for m in range(M)])
        base = D[0]
        m1 = base + np.mean(D[:n1] - base, axis=0)
        mall = base + np.mean(D - base, axis=0)
        A = (D[n1:] - m1) / mu ** p1
        mean_A = A.mean(axis=0)
        sd = np.std(D - mall, axis=0, ddof=1) / mu ** p1
        se_A = sd * math.sqrt(1.0 / n1 + 1.0 / (M - n1))
        ok = bool(np.all(np.abs(mean_A) <= slack_se * se_A))
        mart_ok &= ok
        mom = np.sum(np.abs(A) ** 2, axis=1) ** (q / 2)
        mom_vals.append((float(mom.mean()), float(jackknife_stderr(mom))))
        Bk = mall / mu ** p2
        B_est.append(Bk)
        phin = float(np.linalg.norm(measure_fn(x))) if measure_fn else 0.0
        ratios.append(float(np.linalg.norm(Bk) ** q / (1.0 + phin ** b)))
        details.append({"k": int(k), "mean_A": mean_A, "se_A": se_A, "B": Bk})
    if A_declared is None:
        mom_ok = True
    else:
        mom_ok = all(m <= A_declared + slack_se * se for m, se in mom_vals)
    ceil_ok = max(ratios) <= ceiling
    verdict = PASS if (mart_ok and mom_ok and ceil_ok) else FAIL
    stats = {"probes": details, "moment": mom_vals, "B_ratio_max": max(ratios), "ceiling": ceiling,
             "A_declared": A_declared, "M": M}
    return DecompositionReport("decomposition", verdict, stats, None, "", "",
                               mart_ok, mom_ok, ceil_ok, resampling)


def check_complexity_curve(ens: Ensemble, s: Schedule | None = None, threshold: float = -0.4,
                           min_points: int = 4) -> ConditionReport:
    """Slope of ``log min_{k<=T} E|Phi(x^k)|^2`` against ``log T`` over dyadic ``T >= 2``."""
    logged = ens.logged("measure")
    T = int(logged[-1])
    pts = dyadic_points(T, start=2)
    if len(pts) < min_points:
        raise ValueError(f"too few dyadic points ({len(pts)} < {min_points})")
    m2 = ens.mean("measure", 2.0)
    run_min = np.minimum.accumulate(np.where(np.isfinite(m2), m2, np.inf))
    y = np.array([run_min[p] for p in pts])
    y = np.maximum(y, np.finfo(float).tiny)
    lx, ly = np.log(pts), np.log(y)
    slope = float(np.polyfit(lx, ly, 1)[0])
    stats = {"slope": slope, "threshold": threshold, "T": pts, "min_measure_sq": y}
    verdict = PASS if slope <= threshold else FAIL
    if ens.R > 1 and ens.R < MIN_REPLICATIONS:
        verdict = INCONCLUSIVE
    return ConditionReport("complexity", verdict, stats, (pts[0], pts[-1]), ens.config_hash)


def check_trend(ens: Ensemble, name: str = "measure") -> ConditionReport:
    """Last-decile mean of ``|Phi|`` below its first-decile mean."""
    logged = ens.logged(name)
    T = int(logged[-1])
    m = ens.mean(name)
    first = logged[logged <= 0.1 * T]
    last = logged[logged >= 0.9 * T]
    f, l = float(np.mean(m[first])), float(np.mean(m[last]))
    return ConditionReport("trend", PASS if l < f else FAIL,
                           {"first_decile_mean": f, "last_decile_mean": l}, (0, T), ens.config_hash)
