"""Order-preserving process-pool map shared by the sweep and sensing layers."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, Sequence


def parallel_map(fn: Callable, items: Sequence, workers: int = 1,
                 on_result: Callable[[int, object], None] | None = None) -> list:
    """Apply ``fn`` to every item; results come back in input order.

    ``on_result(index, value)`` fires as each item completes (completion
    order), which lets callers checkpoint.  ``fn`` must be picklable when
    ``workers > 1``.
    """
    items = list(items)
    out: list = [None] * len(items)
    if workers <= 1 or len(items) <= 1:
        for i, it in enumerate(items):
            out[i] = fn(it)
            if on_result is not None:
                on_result(i, out[i])
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(fn, it): i for i, it in enumerate(items)}
        for fut in as_completed(futures):
            i = futures[fut]
            out[i] = fut.result()
            if on_result is not None:
                on_result(i, out[i])
    return out

