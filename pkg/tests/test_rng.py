import math

import numpy as np
import pytest

from coalsim import InputError, categorical, derive_stream
from coalsim.rng import derive_state


def test_same_spec_reproduces_outputs():
    s1 = derive_stream(1234, 7)
    s2 = derive_stream(1234, 7)
    assert [s1.next_uint64() for _ in range(1000)] == [
        s2.next_uint64() for _ in range(1000)
    ]


def test_distinct_indices_differ():
    s0 = derive_stream(1234, 0)
    s1 = derive_stream(1234, 1)
    a = [s0.next_uint64() for _ in range(1000)]
    b = [s1.next_uint64() for _ in range(1000)]
    assert a != b


def test_distinct_masters_differ():
    a = derive_state(1, 0)
    b = derive_state(2, 0)
    assert not np.array_equal(a, b)


def test_uniform_mean():
    # CLT bound: mean of 1e6 uniforms is 0.5 within 3 * (1/sqrt(12)) / 1e3
    u = derive_stream(99, 0).floats(1_000_000)
    assert abs(u.mean() - 0.5) < 3 * (1 / math.sqrt(12)) / 1e3
    assert u.min() >= 0.0 and u.max() < 1.0


def test_negative_index_rejected():
    with pytest.raises(InputError):
        derive_stream(0, -1)


def test_categorical_single_weight():
    s = derive_stream(5, 0)
    assert all(categorical(s, [1.0]) == 0 for _ in range(10))


def test_categorical_zero_weight_excluded():
    s = derive_stream(5, 0)
    assert all(categorical(s, [0.0, 5.0]) == 1 for _ in range(100))
    s = derive_stream(5, 1)
    assert all(categorical(s, [5.0, 0.0]) == 0 for _ in range(100))


def test_categorical_frequencies():
    s = derive_stream(17, 3)
    n = 100_000
    zeros = sum(categorical(s, [1.0, 1.0]) == 0 for _ in range(n))
    se = math.sqrt(0.25 / n)
    assert abs(zeros / n - 0.5) < 3 * se


def test_categorical_cumulative_scan_order():
    # the index is determined by a single uniform and the cumulative scan,
    # so it is predictable from a twin stream
    twin = derive_stream(21, 4)
    s = derive_stream(21, 4)
    for _ in range(200):
        u = twin.next_float()
        expected = 0 if u * 3.0 < 1.0 else (1 if u * 3.0 < 2.0 else 2)
        assert categorical(s, [1.0, 1.0, 1.0]) == expected


def test_categorical_rejects_bad_weights():
    s = derive_stream(0, 0)
    with pytest.raises(InputError):
        categorical(s, [])
    with pytest.raises(InputError):
        categorical(s, [0.0, 0.0])
    with pytest.raises(InputError):
        categorical(s, [1.0, -1.0])
    with pytest.raises(InputError):
        categorical(s, [1.0, math.inf])
