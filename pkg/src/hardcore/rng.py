"""Counter-keyed random streams and the block driver used by every Monte Carlo routine.

Work of size ``n`` is cut into fixed-size blocks.  Block ``b`` of a routine
tagged ``tag`` draws from ``SeedSequence(seed, spawn_key=(tag, b))``, so the
result depends on ``(seed, n)`` only; ``streams`` just sets how many blocks run
concurrently.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._validation import check_positive_int

BLOCK_SIZE = 8192
SEED_MASK = (1 << 64) - 1


def resolve_seed(seed=None):
    """Return a 64-bit integer seed, drawing a fresh one from OS entropy if ``seed`` is None."""
    if seed is None:
        return int(np.random.SeedSequence().generate_state(2, dtype=np.uint32).view(np.uint64)[0])
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    return int(seed) & SEED_MASK


def tag_of(name):
    return zlib.crc32(name.encode())


def stream(seed, *key):
    """Generator for the stream keyed by ``(seed, key...)``."""
    ss = np.random.SeedSequence(resolve_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def blocks(n, block_size=BLOCK_SIZE):
    n = check_positive_int(n, "n")
    return [(b, min(block_size, n - start)) for b, start in enumerate(range(0, n, block_size))]


def map_blocks(fn, n, seed, tag, streams=1, block_size=BLOCK_SIZE):
    """Run ``fn(rng, size, block_index)`` over the blocks of ``n`` and return results in block order."""
    streams = check_positive_int(streams, "streams")
    tag = tag_of(tag) if isinstance(tag, str) else int(tag)
    jobs = blocks(n, block_size)

    def run(job):
        b, size = job
        return fn(stream(seed, tag, b), size, b)

    if streams == 1 or len(jobs) == 1:
        return [run(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=streams) as pool:
        return list(pool.map(run, jobs))
