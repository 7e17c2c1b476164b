import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import central_fd_grad
from optlab.problems import (CATALOG, AbcOracle, FiniteSumObjective, build_problem, largest_eigenvalue,
                             sample_gradient)
from optlab.rng import RngStream

SPECS = [
    {"name": "quadratic", "diag": [1.0, 0.5, 2.0]},
    {"name": "quadratic", "Q": [[2.0, 1.0], [1.0, 2.0]], "c": [1.0, -1.0]},
    {"name": "least_squares", "A": [[1.0, 2.0], [0.0, 1.0], [3.0, 1.0]], "b": [1.0, 0.0, 2.0]},
    {"name": "logistic_finite_sum", "N": 6, "dim": 3, "data_seed": 2, "reg": 0.1},
    {"name": "rosenbrock_regularized", "dim": 4, "b": 2.0},
    {"name": "quadratic_finite_sum", "centers": [[1.0, 0.0], [-1.0, 2.0], [0.0, 1.0]]},
]


def test_identity_quadratic():
    f = build_problem({"name": "quadratic", "Q": np.eye(2).tolist(), "c": [0, 0]})
    x = np.array([1.0, -2.0])
    assert f.value(x) == pytest.approx(2.5)
    assert np.allclose(f.gradient(x), x)
    assert f.lipschitz == pytest.approx(1.0, abs=1e-10)
    assert f.lower_bound == 0.0


def test_least_squares_constants():
    # A^T A = diag(1, 4): largest eigenvalue 4 by hand
    f = build_problem({"name": "least_squares", "A": [[1, 0], [0, 2]], "b": [0, 0]})
    assert f.lipschitz == pytest.approx(4.0, abs=1e-9)
    assert f.lower_bound == pytest.approx(0.0, abs=1e-12)


def test_logistic_gradient_at_zero_matches_fd():
    f = build_problem({"name": "logistic_finite_sum", "N": 4, "dim": 3, "data_seed": 1})
    x = np.zeros(3)
    assert np.allclose(f.gradient(x), central_fd_grad(f.value, x), atol=1e-6)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s["name"])
def test_gradient_matches_fd(spec):
    f = build_problem(spec)
    g = np.random.default_rng(0)
    for _ in range(5):
        x = g.normal(size=f.dim)
        assert np.allclose(f.gradient(x), central_fd_grad(f.value, x), atol=1e-6, rtol=1e-6)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s["name"])
def test_declared_lipschitz_and_lower_bound(spec):
    f = build_problem(spec)
    g = np.random.default_rng(1)
    for _ in range(200):
        x, y = g.normal(size=f.dim) * 2, g.normal(size=f.dim) * 2
        ratio = np.linalg.norm(f.gradient(x) - f.gradient(y)) / np.linalg.norm(x - y)
        assert ratio <= f.lipschitz * (1 + 1e-9)
        assert f.value(x) >= f.lower_bound - 1e-10


def test_quadratic_lower_bound_is_attained():
    Q = np.array([[2.0, 1.0], [1.0, 2.0]])
    c = np.array([1.0, -1.0])
    f = build_problem({"name": "quadratic", "Q": Q.tolist(), "c": c.tolist()})
    xstar = np.linalg.solve(Q, -c)
    assert f.value(xstar) == pytest.approx(f.lower_bound, abs=1e-12)


def test_rejections():
    with pytest.raises(ValueError):
        build_problem({"name": "nope"})
    with pytest.raises(ValueError):
        build_problem({"name": "quadratic", "Q": [[1.0, 0.0], [0.0, -1.0]]})
    with pytest.raises(ValueError):
        build_problem({"name": "quadratic", "Q": [[1.0, 0.0], [0.0, 0.0]], "c": [0.0, 1.0]})
    with pytest.raises(ValueError):
        build_problem({"name": "quadratic", "dim": 101})


def test_largest_eigenvalue():
    M = np.diag([3.0, 1.0, 0.5])
    assert largest_eigenvalue(M) == pytest.approx(3.0, abs=1e-10)


@pytest.mark.parametrize("spec", [s for s in SPECS if s["name"].endswith("finite_sum")], ids=str)
def test_finite_sum_consistency(spec):
    f = build_problem(spec)
    assert isinstance(f, FiniteSumObjective)
    g = np.random.default_rng(3)
    for _ in range(10):
        x = g.normal(size=f.dim)
        avg = np.mean([f.component_gradient(x, i) for i in range(f.N)], axis=0)
        assert np.linalg.norm(f.gradient(x) - avg) <= 1e-12


def test_zero_noise_is_exact():
    f = build_problem("quadratic")
    x = np.arange(5.0)
    rng = RngStream(0)
    assert np.array_equal(sample_gradient(AbcOracle(f), x, rng), f.gradient(x))
    assert rng.counter == 1


def test_unbiased_with_unit_variance():
    f = build_problem({"name": "quadratic", "dim": 3})
    orc = AbcOracle(f, 0.0, 1.0)
    x = np.array([1.0, -1.0, 0.5])
    rng = RngStream(4)
    draws = np.array([sample_gradient(orc, x, rng) for _ in range(100_000)])
    assert np.all(np.abs(draws.mean(axis=0) - f.gradient(x)) < 0.02)


@pytest.mark.parametrize("kind", ["gaussian_isotropic", "bounded_uniform"])
def test_abc_variance_is_C_gap(kind):
    # f = ||x||^2/2 at x with f(x) - fbar = 3, C = 2: E||eps||^2 = 6
    f = build_problem({"name": "quadratic", "dim": 2})
    orc = AbcOracle(f, 2.0, 0.0, kind)
    x = np.array([np.sqrt(6.0), 0.0])
    assert f.value(x) == pytest.approx(3.0)
    rng = RngStream(5)
    eps = np.array([sample_gradient(orc, x, rng) for _ in range(100_000)]) - f.gradient(x)
    assert np.mean(np.sum(eps ** 2, axis=1)) == pytest.approx(6.0, rel=0.05)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s["name"])
@pytest.mark.parametrize("kind", ["gaussian_isotropic", "bounded_uniform"])
def test_unbiasedness_and_abc_bound_everywhere(spec, kind):
    f = build_problem(spec)
    orc = AbcOracle(f, 0.5, 0.3, kind)
    g = np.random.default_rng(6)
    M = 10_000
    for p in range(10):
        x = g.normal(size=f.dim)
        rng = RngStream(9, p)
        d = np.array([sample_gradient(orc, x, rng) for _ in range(M)]) - f.gradient(x)
        se = d.std(axis=0, ddof=1) / np.sqrt(M)
        assert np.all(np.abs(d.mean(axis=0)) < 5 * se + 1e-15)
        sq = np.sum(d ** 2, axis=1)
        bound = orc.C * (f.value(x) - f.lower_bound) + orc.D
        assert sq.mean() <= bound + 5 * sq.std(ddof=1) / np.sqrt(M)


@given(st.integers(0, 2 ** 32))
def test_oracle_determinism(seed):
    f = build_problem({"name": "quadratic", "dim": 3})
    orc = AbcOracle(f, 1.0, 1.0)
    x = np.ones(3)
    a = [sample_gradient(orc, x, RngStream(seed)) for _ in range(1)]
    b = [sample_gradient(orc, x, RngStream(seed)) for _ in range(1)]
    assert np.array_equal(a, b)


def test_catalog_names():
    assert {"quadratic", "least_squares", "logistic_finite_sum", "rosenbrock_regularized"} <= set(CATALOG)
