import numpy as np
import pytest

from rbsim import RandomStream


def test_same_seed_same_sequence():
    a, b = RandomStream(3, 1), RandomStream(3, 1)
    assert np.array_equal(a.normal(1000), b.normal(1000))
    assert np.array_equal(a.uniform(10), b.uniform(10))


def test_distinct_streams_differ_and_look_independent():
    a, b = RandomStream(3, 1).uniform(10**5), RandomStream(3, 2).uniform(10**5)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(a.size)


def test_uniform_open_interval_and_counters():
    s = RandomStream(0)
    u = s.uniform(10**5)
    assert np.all((u > 0) & (u < 1))
    s.normal(7)
    assert s.uniform_count == 10**5 and s.normal_count == 7


def test_spawn_deterministic():
    assert np.array_equal(RandomStream(9).spawn().uniform(5), RandomStream(9).spawn().uniform(5))


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        RandomStream(-1)
