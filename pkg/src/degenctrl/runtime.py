"""Deterministic parallel map over independent work items.

Worker count is capped by the DEGENCTRL_THREADS environment variable
(default 1, i.e. sequential). Results are always reduced in submission
order so that floating-point reductions downstream are bit-reproducible
no matter how many workers ran.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_cap() -> int:
    raw = os.environ.get("DEGENCTRL_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        cap = 1
    return max(1, cap)


def parallel_map(fn, items):
    """Apply fn to each item, returning results in the order of items."""
    items = list(items)
    workers = min(thread_cap(), max(1, len(items)))
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
