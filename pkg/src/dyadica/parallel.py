"""Deterministic worker-thread helper.

DYADICA_THREADS caps the worker threads of embarrassingly parallel scans
(default 1 = serial). Results are always collected in submission order, so
the reduction is deterministic regardless of the cap.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("DYADICA_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Like list(map(fn, items)) but threaded when DYADICA_THREADS > 1."""
    items = list(items)
    cap = thread_cap()
    if cap <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(fn, items))
