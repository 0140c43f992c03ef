"""Counter-based random streams for reproducible parallel Monte Carlo.

Streams are Philox generators keyed by ``(root seed, stream index)``.  Work
is always split into fixed-size tasks whose stream index depends only on the
task number, never on the worker that happens to execute it, so results are
byte-identical for any worker count.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

#: Samples (or chains) per task when work is chunked for parallel execution.
TASK_CHUNK = 1 << 14


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for stream ``index`` under ``seed``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and stream index must be non-negative")
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def task_plan(total: int, chunk: int = TASK_CHUNK) -> list[tuple[int, int, int]]:
    """Fixed partition of ``total`` items into ``(task_index, start, count)``."""
    plan = []
    start = 0
    t = 0
    while start < total:
        n = min(chunk, total - start)
        plan.append((t, start, n))
        start += n
        t += 1
    return plan
