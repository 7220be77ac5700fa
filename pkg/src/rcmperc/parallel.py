"""Deterministic fan-out of independent Monte Carlo tasks."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def run_indexed(fn: Callable[[T], R], tasks: Sequence[T], threads: int = 1) -> list[R]:
    """Results in task order, whatever the thread count.

    Each task must carry its own derived seed; nothing here is random.
    """
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))
