"""Order-preserving process-parallel map.

Every job is a pure function of its item, so the results do not depend on
the number of workers or on scheduling order.
"""
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor


def default_jobs():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
               else (os.cpu_count() or 1))


def pmap(func, items, jobs=None):
    """[func(x) for x in items], run on ``jobs`` worker processes."""
    items = list(items)
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=min(jobs, len(items)), mp_context=ctx) as ex:
        return list(ex.map(func, items, chunksize=chunk))
