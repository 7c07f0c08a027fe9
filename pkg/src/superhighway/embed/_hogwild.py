from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def worker_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


def run_sharded(kernel, shards, seed: int, stream: int, make_args):
    """Run ``kernel(*make_args(shard), seed_w)`` per shard.

    A single shard runs inline (the reproducible path).  Several shards run on
    threads against the same parameter arrays without locking; the kernels
    release the GIL, so updates race and the last write wins.
    """
    seeds = [worker_seed(seed, stream, w) for w in range(len(shards))]
    if len(shards) == 1:
        return [kernel(*make_args(shards[0]), seeds[0])]
    with ThreadPoolExecutor(len(shards)) as pool:
        futures = [pool.submit(kernel, *make_args(s), sd) for s, sd in zip(shards, seeds)]
        return [f.result() for f in futures]


def split(indices: np.ndarray, workers: int) -> list[np.ndarray]:
    parts = [p for p in np.array_split(indices, workers) if p.size]
    return parts or [indices]


def shares(total: int, workers: int) -> list[int]:
    """Split a count as evenly as ``split`` would, without materializing it."""
    q, r = divmod(total, workers)
    parts = [q + (w < r) for w in range(workers)]
    return [p for p in parts if p] or [total]
