"""Thread pool sized by GYROKIN_THREADS (default: one worker per CPU)."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    raw = os.environ.get("GYROKIN_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"GYROKIN_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"GYROKIN_THREADS must be a positive integer, got {raw!r}")
    return n


def parallel_map(fn, items) -> list:
    """Ordered map; serial when a single worker is allowed."""
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
