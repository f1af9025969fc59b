"""Chunked thread execution for the nogil batch kernels.

Each run's random stream is a pure function of (seed, run index), and each
run writes only its own output slot, so splitting a batch across threads
cannot change results: outputs are byte-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

# below this many runs the thread pool costs more than it saves
_MIN_RUNS_PER_WORKER = 2048


def run_chunks(worker: Callable[[int, int], None], num_runs: int, workers: int) -> None:
    """Invoke worker(lo, hi) over a contiguous partition of [0, num_runs)."""
    if num_runs <= 0:
        return
    workers = max(1, min(int(workers), num_runs))
    if workers == 1 or num_runs < _MIN_RUNS_PER_WORKER * 2:
        worker(0, num_runs)
        return
    bounds = [num_runs * i // workers for i in range(workers + 1)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(worker, lo, hi)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for f in futures:
            f.result()
