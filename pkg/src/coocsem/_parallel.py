"""Bounded shard-parallel map over worker processes.

Results are yielded in submission order so callers can merge
deterministically regardless of the worker count.
"""

from collections import deque
from concurrent.futures import ProcessPoolExecutor
from itertools import islice

_CONTEXT = None


def _init_worker(context):
    global _CONTEXT
    _CONTEXT = context


def _run(fn, shard):
    return fn(shard, _CONTEXT)


def chunked(iterable, size):
    it = iter(iterable)
    while True:
        chunk = list(islice(it, size))
        if not chunk:
            return
        yield chunk


def map_shards(fn, shards, threads=1, context=None):
    """Yield ``fn(shard, context)`` for every shard, in order.

    ``fn`` must be a module-level function. With ``threads > 1`` at most
    ``2 * threads`` shards are held in memory at once.
    """
    if threads <= 1:
        for shard in shards:
            yield fn(shard, context)
        return
    with ProcessPoolExecutor(
        max_workers=threads, initializer=_init_worker, initargs=(context,)
    ) as pool:
        pending = deque()
        for shard in shards:
            pending.append(pool.submit(_run, fn, shard))
            if len(pending) >= 2 * threads:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
