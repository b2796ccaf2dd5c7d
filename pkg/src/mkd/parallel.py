"""Worker-pool configuration.

Work is always partitioned the same way regardless of the thread count and
results are merged in a fixed order, so the number of threads never changes
a computed value.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_threads = None


def get_threads() -> int:
    return _threads or os.cpu_count() or 1


def set_threads(n: int | None) -> None:
    """Set the worker count; ``None`` restores the default (available cores)."""
    global _threads
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = n


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``list(map(fn, items))``, possibly on a thread pool; output order matches input."""
    items = list(items)
    threads = threads or get_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
