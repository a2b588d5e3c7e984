"""Thread-pool sizing and order-preserving parallel map.

The HEADLINE_RANK_THREADS environment variable caps internal parallelism;
0 or unset means auto (one worker per CPU).  Results always come back in
input order, so parallel and serial execution are interchangeable.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_ENV_VAR = "HEADLINE_RANK_THREADS"


def thread_count() -> int:
    raw = os.environ.get(_ENV_VAR, "0").strip()
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{_ENV_VAR} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{_ENV_VAR} must be >= 0, got {n}")
    if n == 0:
        return os.cpu_count() or 1
    return n


def map_ordered(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Apply fn to every item, preserving input order in the result."""
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
