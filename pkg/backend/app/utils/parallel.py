"""
CohortForge - Per-patient Parallelism
"""
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from loguru import logger

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    jobs: int = 1,
    chunksize: Optional[int] = None
) -> List[R]:
    """
    Order-preserving map, inline for jobs <= 1, else over a process pool

    Args:
        fn: Picklable callable (module-level function or functools.partial)
        items: Work items, typically one per patient
        jobs: Worker processes
        chunksize: Items per task; defaults to a quarter of an even share

    Returns:
        Results in input order, independent of `jobs`
    """
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(item) for item in items]

    chunksize = chunksize or max(1, len(items) // (jobs * 4))
    logger.debug(f"Mapping {len(items)} items over {jobs} workers (chunksize={chunksize})")
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
