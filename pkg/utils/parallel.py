"""
Thread offload for CPU-bound numerical jobs.

Reconstructions, stationary-point searches and record generation are pure
NumPy work. These helpers run them in worker threads via
``asyncio.to_thread`` so the event loop stays free, bound the number of
concurrent jobs with a semaphore, and always return results in input order.
"""

import asyncio
from typing import Any, Awaitable, Callable, Iterable, List, Optional, TypeVar

from config.settings import MAX_CONCURRENT_WORKERS

T = TypeVar("T")


async def run_in_thread(func: Callable[..., T], *args: Any) -> T:
    """Run ``func(*args)`` in a worker thread."""
    return await asyncio.to_thread(func, *args)


async def gather_in_threads(
    func: Callable[[Any], T],
    items: Iterable[Any],
    limit: int = MAX_CONCURRENT_WORKERS,
    wrap: Optional[Callable[[Callable[[], Awaitable[T]]], Awaitable[Optional[T]]]] = None,
) -> List[Optional[T]]:
    """
    Apply ``func`` to every item in worker threads, at most ``limit`` at a time.

    Args:
        func: Synchronous function of one item.
        items: Inputs.
        limit: Maximum number of concurrently running threads.
        wrap: Optional coroutine wrapper receiving a zero-argument job factory,
            e.g. ``FailureBudget.call``.

    Returns:
        Results in the order of ``items`` (ordered reduction).
    """
    semaphore = asyncio.Semaphore(max(1, limit))

    async def run(item: Any):
        async with semaphore:
            job = lambda: asyncio.to_thread(func, item)  # noqa: E731
            if wrap is None:
                return await job()
            return await wrap(job)

    return list(await asyncio.gather(*(run(item) for item in items)))
