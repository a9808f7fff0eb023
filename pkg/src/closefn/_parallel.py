"""Bounded worker-thread mapping with a deterministic merge.

CLOSEFN_THREADS bounds parallelism: unset or 1 means serial, 0 means one
worker per CPU.  Results always come back in input order, so callers see
identical output whatever the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError


def worker_count() -> int:
    raw = os.environ.get("CLOSEFN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"CLOSEFN_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError(f"CLOSEFN_THREADS must be nonnegative, got {n}")
    if n == 0:
        return os.cpu_count() or 1
    return n


def parallel_map(fn, items):
    """Map fn over items, in order, using at most worker_count() threads."""
    items = list(items)
    workers = min(worker_count(), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
