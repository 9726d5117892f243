"""Thread-count resolution and an order-preserving parallel map."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "RADON_THREADS"


def resolve_threads(threads=None) -> int:
    if threads is None:
        env = os.environ.get(ENV_VAR)
        threads = int(env) if env else 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def pmap(func, items, threads=None) -> list:
    """``[func(x) for x in items]``, possibly on a thread pool.

    Results come back in input order; callers must only write to disjoint
    outputs so the result does not depend on the thread count.
    """
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
