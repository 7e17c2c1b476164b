import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import central_fd_grad, grid_argmin_1d, quadratic_env_1d
from optlab.optimizers import build_smm_problem
from optlab.problems import SmoothObjective, build_problem
from optlab.regularizers import make_regularizer, prox_eval
from optlab.stationarity import (CompositeProblem, check_equivalence_bounds, default_theta,
                                 envelope_lipschitz, moreau_prox, natural_residual)


def zero_f(dim=1):
    return SmoothObjective(dim, lambda x: 0.0, lambda x: np.zeros(dim), 0.0, 0.0, "zero")


def half_sq(dim=1, q=1.0):
    return build_problem({"name": "quadratic", "diag": [q] * dim})


def cp(f, kind="zero", **params):
    return CompositeProblem(f, make_regularizer(kind, params, f.dim))


def test_natural_residual_examples():
    assert np.array_equal(natural_residual(cp(zero_f(2)), 0.7, [1.0, -3.0]), [0.0, 0.0])
    assert natural_residual(cp(half_sq()), 0.5, [2.0])[0] == pytest.approx(1.0)
    assert natural_residual(cp(zero_f(), "l1", lam=1.0), 1.0, [0.3])[0] == pytest.approx(0.3)


def test_natural_residual_rejects_bad_alpha():
    with pytest.raises(ValueError):
        natural_residual(cp(half_sq(), "mcp", lam=1.0, theta=2.0), 2.0, [1.0])


def test_moreau_examples():
    r = moreau_prox(cp(half_sq()), 0.5, [1.0])
    assert r.prox_point[0] == pytest.approx(2 / 3, abs=1e-10)
    assert r.env_grad[0] == pytest.approx(2 / 3, abs=1e-9)
    r = moreau_prox(cp(zero_f(), "l1", lam=1.0), 0.5, [2.0])
    assert r.prox_point[0] == pytest.approx(1.5, abs=1e-10)
    assert r.env_grad[0] == pytest.approx(1.0, abs=1e-9)
    # grid oracle for min |y| + (2 - y)^2
    y = grid_argmin_1d(lambda y: np.abs(y) + (2 - y) ** 2, 2.0)
    assert y == pytest.approx(1.5, abs=1e-6)
    r = moreau_prox(cp(half_sq(), "l1", lam=1.0), 0.2, [0.0])
    assert np.all(r.env_grad == 0.0)


@given(x=st.floats(-4, 4), q=st.floats(0.1, 3), lam=st.floats(0.01, 2))
def test_quadratic_l1_envelope_closed_form(x, q, lam):
    c = cp(build_problem({"name": "quadratic", "diag": [q]}), "l1", lam=lam)
    th = default_theta(c)
    assert moreau_prox(c, th, [x], 1e-12).env_grad[0] == pytest.approx(quadratic_env_1d(q, lam, th, x),
                                                                       abs=1e-8)


def test_moreau_rejects_theta():
    c = cp(half_sq(), "l1", lam=1.0)
    with pytest.raises(ValueError):
        moreau_prox(c, 1.0, [1.0])


PROBLEMS = [
    {"name": "quadratic", "diag": [1.0, 0.5, 2.0]},
    {"name": "least_squares", "A": [[1.0, 2.0], [0.0, 1.0], [3.0, 1.0]], "b": [1.0, 0.0, 2.0]},
    {"name": "logistic_finite_sum", "N": 5, "dim": 2, "data_seed": 3, "reg": 0.05},
    {"name": "rosenbrock_regularized", "dim": 3, "b": 1.0},
]
REGS = [("l1", {"lam": 0.3}), ("mcp", {"lam": 0.5, "theta": 3.0})]


def _instances(n, seed):
    g = np.random.default_rng(seed)
    for i in range(n):
        f = build_problem(PROBLEMS[i % len(PROBLEMS)])
        kind, params = REGS[(i // len(PROBLEMS)) % len(REGS)]
        c = CompositeProblem(f, make_regularizer(kind, params, f.dim))
        th = g.uniform(0.2, 0.9) / (c.L + c.tau)
        yield c, th, g.normal(size=f.dim) * 2


def test_envelope_invariants():
    for c, th, x in _instances(16, 0):
        r = moreau_prox(c, th, x)
        assert np.array_equal(r.env_grad, (x - r.prox_point) / th)
        assert r.env_value <= c.value(x) + 1e-12
        assert r.env_value >= c.psi_lower - 1e-12
        assert r.converged
        # fixed point of the inner prox-gradient step
        beta = 1.0 / (c.L + 1 / th + c.tau)
        y = r.prox_point
        z = prox_eval(c.phi, beta, y - beta * (c.f.gradient(y) + (y - x) / th))
        assert np.linalg.norm(y - z) <= 1e-9


def test_envelope_gradient_matches_fd_small():
    for c, th, x in _instances(8, 1):
        g = moreau_prox(c, th, x, 1e-12).env_grad
        fd = central_fd_grad(lambda z: moreau_prox(c, th, z, 1e-12).env_value, x)
        assert np.linalg.norm(fd - g) <= 1e-4 * max(1.0, np.linalg.norm(g))


def test_envelope_gradient_lipschitz():
    g = np.random.default_rng(2)
    for c, th, x in _instances(8, 2):
        Le = envelope_lipschitz(c, th)
        y = x + g.normal(size=x.size) * 10.0 ** g.uniform(-3, 0)
        d = np.linalg.norm(moreau_prox(c, th, x).env_grad - moreau_prox(c, th, y).env_grad)
        assert d / np.linalg.norm(x - y) <= Le + 1e-6


def test_natural_residual_zero_at_fixed_point():
    c = cp(half_sq(2), "l1", lam=1.0)
    x = np.array([0.0, 0.0])
    assert np.all(natural_residual(c, 0.5, x) == 0)
    assert np.allclose(prox_eval(c.phi, 0.5, x - 0.5 * c.f.gradient(x)), x, atol=1e-10)


@pytest.mark.parametrize("kind,params", [("l1", {"lam": 0.5}), ("mcp", {"lam": 0.5, "theta": 3.0})])
@given(x=st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_residual_monotone_scaling(kind, params, x):
    # |F^a| is nondecreasing in a; |F^a|/a is nonincreasing only for convex phi
    c = cp(build_problem({"name": "quadratic", "diag": [1.0, 0.4]}), kind, **params)
    alphas = np.linspace(0.05, 1.4, 12)
    n = np.array([np.linalg.norm(natural_residual(c, a, x)) for a in alphas])
    assert np.all(np.diff(n) >= -1e-12)
    if c.tau == 0:
        assert np.all(np.diff(n / alphas) <= 1e-12)


def test_residual_ratio_not_monotone_for_mcp():
    c = cp(build_problem({"name": "quadratic", "diag": [1.0, 0.4]}), "mcp", lam=0.5, theta=3.0)
    alphas = np.linspace(0.05, 1.4, 12)
    n = np.array([np.linalg.norm(natural_residual(c, a, [0.0, 1.0])) for a in alphas])
    assert np.any(np.diff(n / alphas) > 1e-12)


def test_stated_lower_bound_defect_frozen():
    # f = x^2/2, phi = 0, theta = 0.1, x = 1: env grad = x/(1+theta), F_nat = x
    rep = check_equivalence_bounds(cp(half_sq()), 0.1, [1.0])
    assert rep.env_grad_norm == pytest.approx(1 / 1.1, abs=1e-12)
    assert rep.nat_norm == pytest.approx(1.0)
    assert rep.stated_lower == pytest.approx(0.7 / 0.9 / 0.1, rel=1e-12)
    assert not rep.stated_lower_ok
    assert rep.corrected_pass
    # the derived lower bound is tight here: 1 / (0.1 (1 + 9 + 1))
    assert rep.corrected_lower == pytest.approx(1 / 1.1, rel=1e-12)
    assert rep.corrected_upper == pytest.approx(10 * (1 + 10 / 9), rel=1e-12)


def test_bounds_zero_case():
    rep = check_equivalence_bounds(cp(half_sq()), 0.1, [0.0])
    assert rep.env_grad_norm == 0.0 and rep.nat_norm == 0.0
    assert rep.stated_pass and rep.corrected_pass


def test_corrected_bounds_hold_with_mcp():
    g = np.random.default_rng(5)
    for i in range(60):
        f = build_problem(PROBLEMS[i % len(PROBLEMS)])
        c = CompositeProblem(f, make_regularizer("mcp", {"lam": g.uniform(0.1, 1), "theta": g.uniform(1.5, 4)},
                                                 f.dim))
        th = g.uniform(0.1, 0.95) / (3 * c.L + c.tau)
        rep = check_equivalence_bounds(c, th, g.normal(size=f.dim) * 2)
        assert rep.corrected_pass, rep
        assert rep.alpha_used == min(1.0, 0.5 / c.tau)


def test_bounds_reject_theta():
    with pytest.raises(ValueError):
        check_equivalence_bounds(cp(half_sq()), 0.5, [1.0])


@pytest.mark.parametrize("name,mt", [("robust_regression_1d", "subgradient"), ("phase_retrieval_1d", "prox_linear")])
def test_nonsmooth_envelope_matches_grid(name, mt):
    model = build_smm_problem({"name": name}, mt)
    c = CompositeProblem(model.objective, make_regularizer("l1", {"lam": 0.1}))
    th = 0.5 / (c.L + c.tau + 1.0)
    for x in (-1.3, 0.2, 0.9, 2.0):
        r = moreau_prox(c, th, [x])
        obj = lambda y: (np.array([c.value([v]) for v in np.atleast_1d(y)])
                         + (np.atleast_1d(y) - x) ** 2 / (2 * th))
        y = grid_argmin_1d(obj, x, span=3.0, coarse_step=1e-3)
        assert r.prox_point[0] == pytest.approx(y, abs=1e-5)
