import numpy as np
import pytest
from scipy import stats

from affourier import _rng
from affourier.fourier import chaos_sample


def test_streams_keyed():
    a = _rng.stream(1, _rng.TAG_CHAOS, 0).random(5)
    assert np.array_equal(a, _rng.stream(1, _rng.TAG_CHAOS, 0).random(5))
    assert not np.array_equal(a, _rng.stream(1, _rng.TAG_CHAOS, 1).random(5))
    assert not np.array_equal(a, _rng.stream(1, _rng.TAG_WALK, 0).random(5))
    assert not np.array_equal(a, _rng.stream(2, _rng.TAG_CHAOS, 0).random(5))


def test_large_seed():
    _rng.stream(2**64 - 1, 3).random()


@pytest.mark.parametrize("count", [1, 65535, 65536, 200_001])
def test_chunks_cover(count):
    b = _rng.chunk_bounds(count)
    assert b[0][0] == 0 and b[-1][1] == count
    assert all(hi == lo2 for (_, hi), (lo2, _) in zip(b, b[1:]))


def test_draw_letters_law():
    rng = _rng.stream(0, 99)
    p = np.array([0.2, 0.5, 0.3])
    letters = _rng.draw_letters(rng, p, 100_000)
    counts = np.bincount(letters, minlength=3)
    assert stats.chisquare(counts, 100_000 * p).pvalue > 1e-4


def test_pmap_order(monkeypatch):
    monkeypatch.setenv("AFFOURIER_THREADS", "4")
    assert _rng.pmap(lambda x: x * x, range(50)) == [x * x for x in range(50)]
    monkeypatch.setenv("AFFOURIER_THREADS", "junk")
    assert _rng.n_threads() >= 1


def test_pool_thread_invariant(proximal, monkeypatch):
    monkeypatch.setenv("AFFOURIER_THREADS", "1")
    a = chaos_sample(proximal, 150_000, seed=5)
    monkeypatch.setenv("AFFOURIER_THREADS", "3")
    b = chaos_sample(proximal, 150_000, seed=5)
    assert np.array_equal(a.points, b.points)
