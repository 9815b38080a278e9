from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

log = logging.getLogger(__name__)

__all__ = ["WORKERS_ENV", "resolve_workers", "ordered_map"]

WORKERS_ENV = "BLOWZOOM_WORKERS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(configured: Optional[int] = None) -> int:
    """Pool size: $BLOWZOOM_WORKERS, then the configured value, then cpu_count."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as e:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from e
        if value < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1, got {value}")
        return value
    if configured is not None:
        return max(1, int(configured))
    return os.cpu_count() or 1


def ordered_map(
    fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None
) -> List[R]:
    """Apply fn to every item; results come back in input order."""
    todo = list(items)
    n = resolve_workers(workers) if workers is None else max(1, workers)
    if n <= 1 or len(todo) <= 1:
        return [fn(x) for x in todo]
    log.debug("ordered_map: %d item(s) on %d worker(s)", len(todo), n)
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, todo))
