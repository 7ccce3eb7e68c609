"""Thread-pool map with deterministic, input-ordered results.

All stochastic units draw from pre-derived RNG substreams, so mapping
them over any number of workers yields identical output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, n_threads=1):
    items = list(items)
    if n_threads is None or n_threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(n_threads)) as ex:
        return list(ex.map(fn, items))
