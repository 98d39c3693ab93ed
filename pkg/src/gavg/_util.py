"""Small shared helpers: worker pool sizing and ordered parallel maps."""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Worker cap from the GAVG_THREADS environment variable (default 1)."""
    raw = os.environ.get("GAVG_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def ordered_map(fn, items):
    """Map fn over items, preserving order.

    Uses a thread pool of size GAVG_THREADS when that is > 1; results are
    assembled in input order either way, so output is independent of the
    worker count.
    """
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def fmt17(x: float) -> str:
    """Format a float with 17 significant digits (CSV contract)."""
    return f"{x:.17g}"
