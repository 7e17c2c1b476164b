"""Acceptance gate: one test per criterion, at the required tolerances and time limits.

Each test records a ``criterion N: PASS|FAIL`` line that is printed in the
terminal summary.
"""

import math
import time

import numpy as np
import pytest

import conftest
from oracles import central_fd_grad, grid_argmin_1d, l1_pen, mcp_pen, prox_objective, scad_pen, student_pen
from optlab.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_FAIL, EXIT_IO, EXIT_OK, main
from optlab.counterexample import run_counterexample
from optlab.experiment import run_config
from optlab.io import write_ensemble
from optlab.optimizers import (OracleSubgradientModel, Schedule, build_smm_problem, run_prox_sgd, run_rr,
                               run_sgd, run_smm)
from optlab.problems import AbcOracle, build_problem
from optlab.regularizers import make_regularizer, prox_eval
from optlab.rng import RngStream
from optlab.stationarity import CompositeProblem, check_equivalence_bounds, moreau_prox
from optlab.verifier import (FAIL, PASS, Ensemble, check_complexity_curve, check_P2, check_recursion,
                             check_trend, recursion_spec)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def record(n, ok, elapsed, limit, detail):
    status = "PASS" if ok and elapsed < limit else "FAIL"
    conftest.ACCEPTANCE_LINES[n] = f"criterion {n:2d}: {status}  {elapsed:7.2f} s (limit {limit:g} s)  {detail}"
    return status == "PASS"


# ---------------------------------------------------------------- ensembles shared with criterion 12

CFG6 = {"method": "sgd", "problem": {"name": "quadratic", "dim": 5}, "oracle": {"C": 0.0, "D": 1.0},
        "schedule": {"kind": "inv_k", "c": 1.0, "p": 1.0}, "T": 1000, "reps": 64, "seed": 1}
CFG7 = {"method": "prox_sgd", "problem": {"name": "quadratic", "diag": [1.0, 0.5, 0.25, 2.0, 1.0]},
        "regularizer": {"kind": "l1", "lam": 0.1}, "oracle": {"C": 1.0, "D": 1.0},
        "schedule": {"kind": "inv_k", "c": 0.5, "p": 1.0}, "T": 1000, "reps": 32, "stride": 1, "seed": 2}
CFG8 = {"method": "smm", "model_type": "subgradient", "problem": {"name": "robust_regression_1d"},
        "regularizer": {"kind": "l1", "lam": 0.1}, "schedule": {"kind": "inv_k", "c": 0.5, "p": 1.0},
        "T": 1000, "reps": 32, "stride": 1, "seed": 3}
# step cap 1/(2(1/theta - L)) with theta = 1/(2(3L + 1)), L = 1
_TH9 = 1.0 / (2 * (3 * 1.0 + 1))
CFG9 = {"method": "prox_sgd", "problem": {"name": "quadratic", "diag": [1.0, 0.5, 0.25, 1.0, 0.5]},
        "regularizer": {"kind": "l1", "lam": 0.1}, "oracle": {"C": 0.0, "D": 1.0},
        "schedule": {"kind": "inv_k_log", "c": 5.0}, "alpha_cap": 1.0 / (2 * (1 / _TH9 - 1.0)),
        "T": 2 ** 14, "reps": 32, "seed": 9}

_cache = {}


def ensemble(n):
    if n not in _cache:
        cfg = {6: CFG6, 7: CFG7, 8: CFG8, 9: CFG9}[n]
        with Timer() as t:
            ens = run_config(cfg)
        _cache[n] = (ens, t.elapsed)
    return _cache[n]


# ---------------------------------------------------------------- 1, 2: counterexample

def test_criterion_01_counterexample_exactness():
    T = 10 ** 4
    with Timer() as t:
        tr = run_counterexample(T)
        dev = float(np.max(np.abs(tr.x - 1.0 / (tr.k + 1))))
        mn = float(tr.running_min_sq[-1])
    ok = dev <= 1e-12 and mn <= 1.0 / T ** 2
    assert record(1, ok, t.elapsed, 1.0, f"max|x^k-1/(k+1)|={dev:.1e}, min|f'|^2={mn:.2e} <= {1 / T ** 2:.0e}")


def test_criterion_02_counterexample_nonconvergence():
    T = 10 ** 3
    with Timer() as t:
        tr = run_counterexample(T)
        k = tr.k
        on = {p: bool(np.all(np.abs(np.abs(tr.grad[(k % 2 == p) & (k >= 1)]) - 1) <= 1e-12)) for p in (0, 1)}
        s = math.fsum(a * g * g for a, g in zip(tr.alpha, tr.grad))
    ok = (on[0] != on[1]) and s < 1
    parity = "odd" if on[1] else "even"
    assert record(2, ok, t.elapsed, 1.0, f"|f'|=1 on {parity} k, sum alpha|f'|^2={s:.6f} < 1")


# ---------------------------------------------------------------- 3, 4, 5: stationarity machinery

PROX_CASES = {
    "l1": ({"lam": 0.7}, l1_pen(0.7)),
    "mcp": ({"lam": 1.0, "theta": 2.0}, mcp_pen(1.0, 2.0)),
    "scad": ({"lam": 0.8, "theta": 3.7}, scad_pen(0.8, 3.7)),
    "student_t": ({"theta": 1.5}, student_pen(1.5)),
}


def test_criterion_03_prox_oracle_equivalence():
    worst = 0.0
    with Timer() as t:
        for kind, (params, pen) in PROX_CASES.items():
            r = make_regularizer(kind, params)
            g = np.random.default_rng(300 + len(kind))
            amax = 10.0 if r.tau == 0 else 1.0 / (2 * r.tau)
            for _ in range(200):
                a = g.uniform(1e-3, amax) * (1 - 1e-9)
                x = g.uniform(-5, 5)
                y = grid_argmin_1d(prox_objective(pen, a, x), x)
                worst = max(worst, abs(prox_eval(r, a, [x])[0] - y))
    assert record(3, worst <= 1e-5, t.elapsed, 10.0, f"4 x 200 pairs, max |prox - grid| = {worst:.1e}")


CATALOG4 = [
    {"name": "quadratic", "diag": [1.0, 0.5, 2.0]},
    {"name": "least_squares", "A": [[1.0, 2.0], [0.0, 1.0], [3.0, 1.0]], "b": [1.0, 0.0, 2.0]},
    {"name": "logistic_finite_sum", "N": 6, "dim": 3, "data_seed": 4, "reg": 0.05},
    {"name": "rosenbrock_regularized", "dim": 3, "b": 1.0},
    {"name": "quadratic_finite_sum", "centers": [[1.0, 0.0], [-1.0, 2.0], [0.5, 0.5]]},
]


def test_criterion_04_envelope_gradient():
    g = np.random.default_rng(4)
    worst = 0.0
    with Timer() as t:
        for i in range(50):
            f = build_problem(CATALOG4[i % len(CATALOG4)])
            reg = (make_regularizer("l1", {"lam": g.uniform(0.05, 1.0)}, f.dim) if i % 2 == 0 else
                   make_regularizer("mcp", {"lam": g.uniform(0.1, 1.0), "theta": g.uniform(1.5, 4.0)}, f.dim))
            cp = CompositeProblem(f, reg)
            th = g.uniform(0.1, 0.9) / (cp.L + cp.tau)
            x = g.normal(size=f.dim) * 2
            grad = moreau_prox(cp, th, x, 1e-12).env_grad
            fd = central_fd_grad(lambda z: moreau_prox(cp, th, z, 1e-12).env_value, x)
            worst = max(worst, float(np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-12)))
    assert record(4, worst <= 1e-4, t.elapsed, 60.0, f"50 instances, max relative FD error = {worst:.1e}")


def _bound_instances(n, seed):
    g = np.random.default_rng(seed)
    for i in range(n):
        f = build_problem(CATALOG4[i % len(CATALOG4)])
        reg = (make_regularizer("l1", {"lam": g.uniform(0.05, 1.0)}, f.dim) if i % 2 == 0 else
               make_regularizer("mcp", {"lam": g.uniform(0.1, 1.0), "theta": g.uniform(1.5, 4.0)}, f.dim))
        cp = CompositeProblem(f, reg)
        th = g.uniform(0.05, 0.95) / (3 * cp.L + cp.tau)
        yield cp, th, g.normal(size=f.dim) * 2


@pytest.mark.xfail(strict=True, reason="the stated envelope/residual constants are violated; "
                                       "see test_criterion_05_corrected_bounds")
def test_criterion_05_envelope_residual_bounds():
    with Timer() as t:
        reps = [check_equivalence_bounds(cp, th, x) for cp, th, x in _bound_instances(100, 5)]
    lo = sum(r.stated_lower_ok for r in reps)
    up = sum(r.stated_upper_ok for r in reps)
    corr = sum(r.corrected_pass for r in reps)
    ok = lo == up == 100
    record(5, ok, t.elapsed, 60.0, f"stated bounds: lower holds {lo}/100, upper holds {up}/100; "
                                   f"derived bounds hold {corr}/100")
    assert ok


def test_criterion_05_corrected_bounds():
    # the derived constants are the documented replacement; they must always hold
    reps = [check_equivalence_bounds(cp, th, x) for cp, th, x in _bound_instances(100, 5)]
    assert all(r.corrected_pass for r in reps)


# ---------------------------------------------------------------- 6, 7, 8: recursions

def _recursion_criterion(n, name, limit):
    ens, run_time = ensemble(n)
    with Timer() as t:
        rep = check_recursion(ens, name, slack_se=5.0)
    frac = rep.statistics["pass_fraction"]
    elapsed = run_time + t.elapsed
    ok = rep.verdict == PASS and frac >= 0.99
    return record(n, ok, elapsed, limit, f"{name}: {frac:.4f} of {rep.statistics['n_eligible']} eligible k pass")


def test_criterion_06_sgd_descent_recursion():
    assert _recursion_criterion(6, "sgd_descent", 30.0)


def test_criterion_07_prox_sgd_step_length():
    assert _recursion_criterion(7, "prox_sgd_step", 60.0)


def test_criterion_08_smm_step_length():
    assert _recursion_criterion(8, "smm_step", 60.0)


# ---------------------------------------------------------------- 9: complexity slope

def test_criterion_09_complexity_slope():
    ens, run_time = ensemble(9)
    with Timer() as t:
        rep = check_complexity_curve(ens, threshold=-0.4)
    slope = rep.statistics["slope"]
    ok = rep.verdict == PASS and slope <= -0.4 and rep.statistics["T"][-1] == 2 ** 14
    assert record(9, ok, run_time + t.elapsed, 600.0, f"fitted slope {slope:.3f} <= -0.4 over T = 1..2^14, R=32")


# ---------------------------------------------------------------- 10: reductions

def test_criterion_10_reductions():
    with Timer() as t:
        f = build_problem({"name": "quadratic", "diag": [1.0, 0.5, 2.0]})
        orc = AbcOracle(f, 0.5, 1.0)
        zero = make_regularizer("zero", {}, 3)
        s = Schedule("inv_k")
        x0 = np.ones(3)
        results = []
        for r in range(4):
            a = run_sgd(f, orc, s, x0, 500, RngStream(10, r), snapshot_stride=50)
            b = run_prox_sgd(CompositeProblem(f, zero), orc, s, x0, 500, RngStream(10, r), snapshot_stride=50)
            c = run_smm(CompositeProblem(f, zero), OracleSubgradientModel(orc), s, x0, 500, RngStream(10, r),
                        snapshot_stride=50)
            results += [a.same_path(b), a.same_path(c)]
        fs = build_problem({"name": "quadratic_finite_sum", "centers": [[2.0, -1.0, 0.5]]})
        rr = run_rr(fs, Schedule("inv_k", 0.5), [0.0, 0.0, 0.0], 200, RngStream(11))
        x = np.zeros(3)
        for k in range(200):
            x = x - Schedule("inv_k", 0.5).value(k) * fs.gradient(x)
        results.append(np.array_equal(rr.final_x, x))
    assert record(10, all(results), t.elapsed, 5.0,
                  f"{sum(results)}/{len(results)} bit-identical (prox-SGD vs SGD, SMM vs SGD, RR(N=1) vs GD)")


# ---------------------------------------------------------------- 11: negative controls

def test_criterion_11_negative_controls(tmp_path):
    ens6, _ = ensemble(6)
    with Timer() as t:
        T = 4097
        fixture = Ensemble.from_arrays(1.0 / np.arange(1, T + 1), np.ones((8, T)), method="sgd")
        p2 = check_P2(fixture).verdict
        halved = check_recursion(ens6, recursion_spec("sgd_descent", 0.5), slack_se=5.0).verdict
        codes = {}
        path = write_ensemble(fixture, tmp_path / "neg")
        codes["verify P2 on fixture"] = (main(["verify", str(path), "--conditions", "P2"]), EXIT_FAIL)
        codes["rr on non-finite-sum"] = (main(["run", "--method", "rr", "--problem", "quadratic",
                                               "--out", str(tmp_path / "rr")]), EXIT_CONFIG)
        (tmp_path / "file").write_text("")
        codes["unwritable output"] = (main(["run", "--T", "5", "--reps", "1",
                                            "--out", str(tmp_path / "file" / "x")]), EXIT_IO)
        codes["all diverged"] = (main(["run", "--schedule", "constant", "--c", "3", "--T", "2000", "--reps", "2",
                                       "--out", str(tmp_path / "div")]), EXIT_DIVERGED)
        codes["plain run"] = (main(["run", "--T", "50", "--reps", "2", "--out", str(tmp_path / "ok")]), EXIT_OK)
    bad = [k for k, (got, want) in codes.items() if got != want]
    ok = p2 == FAIL and halved == FAIL and not bad
    assert record(11, ok, t.elapsed, 30.0, f"P2 on constant measure: {p2}; halved RHS: {halved}; "
                                           f"exit codes {'ok' if not bad else 'wrong: ' + ', '.join(bad)}")


# ---------------------------------------------------------------- 12: trend

def test_criterion_12_trend():
    parts, ok = [], True
    for n in (6, 7, 8, 9):
        ens, _ = ensemble(n)
        rep = check_trend(ens)
        s = rep.statistics
        ok &= rep.verdict == PASS and s["last_decile_mean"] < s["first_decile_mean"]
        parts.append(f"{n}: {s['first_decile_mean']:.3g} -> {s['last_decile_mean']:.3g}")
    assert record(12, ok, 0.0, 1.0, "first -> last decile mean |Phi|; " + "; ".join(parts))
