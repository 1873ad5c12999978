import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

_T = TypeVar("_T")

logger = logging.getLogger(__name__)


def default_threads() -> int:
    return os.cpu_count() or 1


def run_ensemble(
    task: Callable[[int], _T], count: int, threads: Optional[int] = None
) -> List[_T]:
    """Evaluate ``task(i)`` for ``i = 0..count-1``; results are ordered by ``i``.

    ``task`` must draw its randomness from the trajectory index only (for example
    through ``NoiseStream.child(i)``), so the results do not depend on ``threads``.
    """
    if count < 0:
        raise ValueError(f"ensemble size must be non-negative, got {count}")
    workers = default_threads() if threads is None else threads
    if workers < 1:
        raise ValueError(f"thread count must be at least 1, got {workers}")
    workers = min(workers, max(count, 1))
    logger.debug("running %d trajectories on %d threads", count, workers)
    if workers == 1:
        return [task(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(count)))
