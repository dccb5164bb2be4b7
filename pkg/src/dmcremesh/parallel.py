"""Chunked execution of nogil kernels on a thread pool.

Work is always split into the same fixed-size chunks regardless of the
thread count, and every chunk writes into its own slice of a preallocated
output, so results are byte-identical for any number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

DEFAULT_CHUNK = 1 << 14

_threads = 1


def set_threads(n: int) -> None:
    """Set the worker count used by :func:`run_chunked` (0 = all cores)."""
    global _threads
    if n < 0:
        raise ValueError("threads must be >= 0")
    _threads = n or (os.cpu_count() or 1)


def get_threads() -> int:
    return _threads


def run_chunked(kernel, n: int, chunk: int = DEFAULT_CHUNK, threads: int | None = None) -> None:
    """Call ``kernel(lo, hi)`` over ``[0, n)`` in fixed chunks."""
    threads = _threads if threads is None else (threads or (os.cpu_count() or 1))
    ranges = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    if threads <= 1 or len(ranges) <= 1:
        for lo, hi in ranges:
            kernel(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for fut in [pool.submit(kernel, lo, hi) for lo, hi in ranges]:
            fut.result()
