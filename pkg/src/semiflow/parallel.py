"""Deterministic parallel map.

Results come back in input order and every item is computed independently,
so the output never depends on the worker count; with one worker the map
runs inline.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKER_ENV_VAR = "SEMIFLOW_WORKERS"


def worker_count(requested: int | None = None) -> int:
    env = os.environ.get(WORKER_ENV_VAR)
    if env is not None:
        return max(1, int(env))
    return max(1, requested or 1)


def pmap(fn, items, workers: int = 1) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
