"""Deterministic seeding and optional worker-pool parallelism."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derived_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator derived from a root seed and integer keys.

    Stable across runs and independent of scheduling order, so per-trial streams can be
    fanned out to workers without losing reproducibility.
    """
    return np.random.default_rng([int(seed)] + [int(k) for k in keys])


def thread_budget() -> int:
    raw = os.environ.get("PERFLAT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def task_map(fn, items):
    """Map fn over items, in a thread pool when PERFLAT_THREADS > 1.

    Results keep the order of ``items``; callers pass pre-derived seeds so output is
    identical either way.
    """
    n = thread_budget()
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
