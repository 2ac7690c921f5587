"""Thread-pool fan-out capped by the ROUGHKIT_THREADS environment variable."""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    raw = os.environ.get("ROUGHKIT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    items = list(items)
    workers = thread_count()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
