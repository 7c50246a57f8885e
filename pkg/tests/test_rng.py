import numpy as np
import pytest

from reldec.rng import CounterStream, chunks, map_chunks


def test_blocks_are_addressed_by_member_index():
    s = CounterStream(42, "tags")
    full = s.block(0, 100)
    np.testing.assert_array_equal(s.block(37, 20), full[37:57])


def test_uniform_range():
    u = CounterStream(1, "x").uniforms(0, 10000)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.02


def test_purposes_and_seeds_are_independent_streams():
    a = CounterStream(1, "a").uniforms(0, 8)
    assert not np.array_equal(a, CounterStream(1, "b").uniforms(0, 8))
    assert not np.array_equal(a, CounterStream(2, "a").uniforms(0, 8))
    np.testing.assert_array_equal(a, CounterStream(1, "a").uniforms(0, 8))


@pytest.mark.parametrize("threads", [1, 2, 3, 7, 64])
def test_map_chunks_is_thread_count_independent(threads):
    s = CounterStream(9, "tags")
    serial = s.uniforms(0, 1000)
    np.testing.assert_array_equal(map_chunks(lambda a, c: s.uniforms(a, c), 1000, threads), serial)


def test_chunks_cover_range():
    parts = chunks(10, 4)
    assert sum(c for _, c in parts) == 10
    assert parts[0][0] == 0
    assert chunks(3, 10) == [(0, 1), (1, 1), (2, 1)]


def test_seed_range():
    with pytest.raises(ValueError):
        CounterStream(-1, "x")
    CounterStream(2 ** 64 - 1, "x")
