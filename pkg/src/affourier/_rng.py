"""Deterministic random streams and order-preserving parallel map.

Every Monte Carlo routine splits its index range into fixed-size chunks and
draws chunk ``k`` from the stream keyed by ``(seed, tag, k)``. The chunk
layout depends only on the sample count, so results are bit-identical for
any number of worker threads.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 16

# stream tags keep unrelated consumers of one master seed apart
TAG_CHAOS = 1
TAG_LYAPUNOV = 2
TAG_WALK = 3
TAG_RENEWAL = 4
TAG_LIMIT = 5
TAG_GUIVARCH = 6
TAG_PROPS = 7
TAG_CONE = 8
TAG_TUBE = 9


def stream(seed, *key):
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
    )


def chunk_bounds(count, chunk=CHUNK):
    return [(lo, min(lo + chunk, count)) for lo in range(0, count, chunk)]


def n_threads():
    raw = os.environ.get("AFFOURIER_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def pmap(fn, items):
    """``list(map(fn, items))``, run on up to ``AFFOURIER_THREADS`` threads."""
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def draw_letters(rng, weights, size):
    """i.i.d. letters with law ``weights`` by inverse CDF on uniforms."""
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.intp)
