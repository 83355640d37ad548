"""Order-preserving thread map with an environment-controlled worker cap.

OSPACE_THREADS sets the worker count (default 1, which runs inline).  All
mapped functions in this package are pure per item, so results only need
to come back in input order for the pipeline to stay deterministic.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["worker_count", "thread_map"]


def worker_count() -> int:
    raw = os.environ.get("OSPACE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"OSPACE_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"OSPACE_THREADS must be at least 1, got {n}")
    return n


def thread_map(fn, items) -> list:
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
