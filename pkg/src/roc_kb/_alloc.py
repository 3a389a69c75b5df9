"""Allocation helpers shared by the store and the query evaluator."""

import gc
from contextlib import contextmanager


@contextmanager
def collector_paused():
    """Suspend cyclic garbage collection for a block.

    Bulk loads and joins allocate many small tuples and dicts but no reference
    cycles, so collector passes during them only cost time.  Nested or
    concurrent use is safe: only the outermost caller that found the collector
    enabled turns it back on.
    """
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()
