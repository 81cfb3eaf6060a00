# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import logging
import os
from typing import Callable, Iterable, List, TypeVar

from joblib import Parallel, cpu_count, delayed

logger = logging.getLogger(__name__)

THREADS_ENV = "WHCERT_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    """Workers for parallel solves: WHCERT_THREADS if set to a positive integer, else the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            logger.warning("ignoring %s=%r, not an integer", THREADS_ENV, raw)
        else:
            if value >= 1:
                return value
            logger.warning("ignoring %s=%r, must be positive", THREADS_ENV, raw)
    return max(1, cpu_count())


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """
    Applies fn to every item on a joblib thread pool.
    Args:
        fn: function of one item, usually a conic solve
        items: independent work items

    Returns:
        List[R]: results in input order
    """
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    # work items close over ConicProblem objects, so the pool runs threads
    return Parallel(n_jobs=workers, prefer="threads")(delayed(fn)(item) for item in items)
