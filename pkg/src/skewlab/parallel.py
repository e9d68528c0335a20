"""Job-level parallelism with scheduling-independent results."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_jobs() -> int:
    return os.cpu_count() or 1


def run_jobs(fn, payloads, jobs: int = 1) -> list:
    """Map fn over payloads, returning results in payload order.

    Each payload carries its own seed material, so the output is identical
    for any worker count.
    """
    payloads = list(payloads)
    if jobs <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=min(jobs, len(payloads))) as pool:
        return list(pool.map(fn, payloads))
