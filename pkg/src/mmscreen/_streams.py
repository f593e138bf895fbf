"""Keyed random streams and a deterministic thread map.

Every random draw in the package comes from a PCG64 generator seeded by
``SeedSequence([seed, purpose, index])``.  Results therefore depend only on
the key, never on execution order or on how many threads are used.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigurationError

PURPOSES = {
    "init": 0,
    "knockoff": 1,
    "init-knockoff": 2,
    "simulate": 3,
    "kmeans": 4,
    "layout": 5,
}

THREADS_ENV = "MMSCREEN_THREADS"


def stream(seed, purpose, index=0):
    """Independent generator for ``(seed, purpose, index)``."""
    if seed < 0 or seed >= 2**64:
        raise ConfigurationError("seed must be a 64-bit unsigned integer")
    key = [int(seed), PURPOSES[purpose], int(index)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads < 1:
        raise ConfigurationError("thread count must be >= 1")
    return threads


def thread_map(fn, items, threads=None):
    """``list(map(fn, items))`` run on a thread pool, results in input order."""
    threads = resolve_threads(threads)
    items = list(items)
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
