# core/workers.py
# Chunked execution with per-chunk random substreams and a stoppable controller.
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from core.errors import Cancelled, ParameterError

T = TypeVar("T")

# samples per chunk; part of the random-stream layout, changing it changes results
CHUNK_SIZE = 1024


class RunController:
    """
    Handle held by the caller of a long computation; stop() is honoured
    between chunks.
    """

    def __init__(self):
        self._stop_flag = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self.result = None
        self.error: Optional[BaseException] = None

    def stop(self):
        self._stop_flag.set()

    def should_stop(self) -> bool:
        return self._stop_flag.is_set()

    def set_thread(self, t: threading.Thread):
        self._thread = t

    def is_alive(self) -> bool:
        return self._thread.is_alive() if self._thread else False

    def join(self, timeout: Optional[float] = None):
        if self._thread is not None:
            self._thread.join(timeout)


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Independent generator for one chunk; depends only on (seed, chunk_index)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(chunk_index)])


def chunk_bounds(total: int, chunk: int = CHUNK_SIZE) -> List[Tuple[int, int, int]]:
    if total < 0 or chunk < 1:
        raise ParameterError(f"invalid chunking total={total} chunk={chunk}")
    return [(i, start, min(start + chunk, total)) for i, start in enumerate(range(0, total, chunk))]


def map_chunks(fn: Callable[[int, int, int], T], total: int, chunk: int = CHUNK_SIZE,
               workers: int = 1, controller: Optional[RunController] = None) -> List[T]:
    """Run ``fn(chunk_index, start, stop)`` over all chunks; results in chunk order."""
    bounds = chunk_bounds(total, chunk)
    if workers <= 1 or len(bounds) <= 1:
        out = []
        for b in bounds:
            if controller is not None and controller.should_stop():
                raise Cancelled("stopped")
            out.append(fn(*b))
        return out

    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        futures = [pool.submit(_guarded, fn, b, controller) for b in bounds]
        try:
            return [f.result() for f in futures]
        except Cancelled:
            for f in futures:
                f.cancel()
            raise


def _guarded(fn, bounds: Sequence[int], controller: Optional[RunController]):
    if controller is not None and controller.should_stop():
        raise Cancelled("stopped")
    return fn(*bounds)
