"""Order-preserving fan-out over sample indices.

Work items are identified by index only; anything random inside a work item
must be derived from ``(seed, index)`` so results do not depend on how the
indices are split across workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def _run_chunk(fn, chunk):
    return [fn(i) for i in chunk]


def map_indices(fn, n, workers=1):
    """Return ``[fn(0), ..., fn(n - 1)]``, optionally using worker processes."""
    if workers <= 1 or n < 2:
        return [fn(i) for i in range(n)]
    size = -(-n // workers)
    chunks = [range(lo, min(lo + size, n)) for lo in range(0, n, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [fn] * len(chunks), chunks)
        return [r for part in parts for r in part]
