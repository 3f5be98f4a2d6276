"""Fork-join execution helpers and abstract work/span accounting.

Everything in this package that claims to be "parallel" runs through the two
entry points here: :func:`pmap` for fork-join maps and :class:`WorkSpanMeter`
for cost accounting.  The contract is strict determinism: results are combined
in input order, worker threads never share mutable state, and randomized
callers derive their streams from explicit seeds, so outputs are bitwise
identical for 1 worker and for ``max`` workers.

The meter does not measure wall time.  It counts abstract operations, with
span charged as the critical-path length of the ideal fork-join schedule:
an elementwise pass over ``n`` items costs span 1, a reduction or scan of
length ``n`` costs ``ceil(log2 n)`` levels, and a fork-join over independent
tasks costs the maximum of the children.  This is the empirical stand-in used
by the test suite to check growth rates (for example, that scans have
logarithmic span) rather than constants.
"""

from __future__ import annotations

import contextvars
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
U = TypeVar("U")

_active_meter: contextvars.ContextVar["WorkSpanMeter | None"] = contextvars.ContextVar(
    "flowtree_active_meter", default=None
)
_pmap_depth: contextvars.ContextVar[int] = contextvars.ContextVar(
    "flowtree_pmap_depth", default=0
)


def ceil_log2(n: int) -> int:
    """Smallest k with 2**k >= n (0 for n <= 1)."""
    if n <= 1:
        return 0
    return (n - 1).bit_length()


class WorkSpanMeter:
    """Opt-in counter of abstract work and span.

    Use as a context manager; instrumented operations executed inside the
    ``with`` block accumulate into it.  When no meter is active, accounting
    is a single context-variable read, so the instrumentation is effectively
    free in production paths.
    """

    __slots__ = ("work", "span", "_token")

    def __init__(self) -> None:
        self.work = 0
        self.span = 0
        self._token = None

    def __enter__(self) -> "WorkSpanMeter":
        self._token = _active_meter.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_meter.reset(self._token)
        self._token = None

    def add(self, work: int, span: int) -> None:
        self.work += work
        self.span += span

    def merge_parallel(self, children: Sequence["WorkSpanMeter"]) -> None:
        """Fold child meters from a fork-join: work adds, span maxes."""
        if not children:
            return
        self.work += sum(c.work for c in children)
        self.span += max(c.span for c in children)


def account(work: int, span: int) -> None:
    """Charge the active meter, if any."""
    meter = _active_meter.get()
    if meter is not None:
        meter.add(work, span)


def account_map(n: int) -> None:
    """Elementwise pass over n items: work n, span 1."""
    account(n, 1)


def account_scan(n: int) -> None:
    """Reduction/scan of length n: work n, span ceil(log2 n) + 1."""
    account(max(n, 1), ceil_log2(n) + 1)


def resolve_workers(threads: int | None = None) -> int:
    """Worker count: explicit arg, else FLOWTREE_THREADS, else cpu count."""
    if threads is not None and threads > 0:
        return threads
    env = os.environ.get("FLOWTREE_THREADS")
    if env:
        try:
            k = int(env)
            if k > 0:
                return k
        except ValueError:
            pass
    return os.cpu_count() or 1


def pmap(fn: Callable[[T], U], items: Iterable[T], workers: int | None = None) -> list[U]:
    """Deterministic fork-join map.

    Results are returned in input order.  Each task runs with its own child
    meter; the parent meter receives the sum of child work and the max of
    child spans, independent of how tasks were scheduled.
    """
    items = list(items)
    if not items:
        return []
    workers = resolve_workers(workers)
    parent = _active_meter.get()
    child_meters = [WorkSpanMeter() for _ in items] if parent is not None else None
    depth = _pmap_depth.get()

    def run(idx_item):
        idx, item = idx_item
        ctx = contextvars.copy_context()

        def inner():
            tok = _pmap_depth.set(depth + 1)
            mtok = (_active_meter.set(child_meters[idx])
                    if child_meters is not None else None)
            try:
                return fn(item)
            finally:
                if mtok is not None:
                    _active_meter.reset(mtok)
                _pmap_depth.reset(tok)

        return ctx.run(inner)

    # Nested fork-joins run serially: worker threads are only spawned at the
    # outermost level, which bounds the total thread count without changing
    # any output (combination order is fixed either way).
    if workers == 1 or len(items) == 1 or depth >= 1:
        results = [run(pair) for pair in enumerate(items)]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
            results = list(pool.map(run, enumerate(items)))
    if parent is not None and child_meters is not None:
        parent.merge_parallel(child_meters)
    return results


def parallel_chunks(n: int, max_chunks: int) -> list[tuple[int, int]]:
    """Split range(n) into at most max_chunks contiguous (start, stop) slices."""
    if n <= 0:
        return []
    k = max(1, min(max_chunks, n))
    step = math.ceil(n / k)
    return [(i, min(i + step, n)) for i in range(0, n, step)]
