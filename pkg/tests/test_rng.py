import numpy as np
from hypothesis import given, strategies as st

from optlab.rng import RngStream, default_seed


def test_same_triple_same_numbers():
    a, b = RngStream(7, 3), RngStream(7, 3)
    assert np.array_equal(a.normal(5), b.normal(5))
    assert np.array_equal(a.permutation(10), b.permutation(10))


def test_counter_advances_and_replays():
    a = RngStream(1)
    first = a.normal(3)
    assert a.counter == 1
    again = RngStream(1, counter=0).normal(3)
    assert np.array_equal(first, again)
    b = RngStream(1, counter=1)
    assert np.array_equal(a.normal(3), b.normal(3))


def test_replications_and_substreams_differ():
    x = RngStream(1, 0).normal(4)
    assert not np.array_equal(x, RngStream(1, 1).normal(4))
    assert not np.array_equal(x, RngStream(1, 0, substream=(2,)).normal(4))
    assert not np.array_equal(x, RngStream(2, 0).normal(4))


def test_copy_is_independent():
    a = RngStream(5)
    a.normal()
    b = a.copy()
    assert np.array_equal(a.uniform(size=3), b.uniform(size=3))


@given(st.integers(1, 40), st.integers(0, 2 ** 32))
def test_permutation_is_a_permutation(n, seed):
    p = RngStream(seed).permutation(n)
    assert sorted(p.tolist()) == list(range(n))


def test_default_seed_env(monkeypatch):
    monkeypatch.delenv("OPT_LAB_SEED", raising=False)
    assert default_seed(11) == 11
    monkeypatch.setenv("OPT_LAB_SEED", "42")
    assert default_seed(11) == 42
