"""Virtual-time kernel: event queue, simulation clock, seeded random streams.

Time is integer milliseconds. All randomness flows from one master seed
through labeled stream forking, so a child stream's sequence depends only on
(root seed, label path) and never on draw order elsewhere.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Callable


class SimError(Exception):
    """Programming error against the kernel's contract."""


class EventHandle:
    """Returned by schedule(); cancel() makes the dispatcher skip the event."""

    __slots__ = ("at", "seq", "fn", "cancelled")

    def __init__(self, at: int, seq: int, fn: Callable[[], None]):
        self.at = at
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class EventLoop:
    """Deterministic event queue with FIFO tie-break among equal timestamps."""

    def __init__(self) -> None:
        self.now = 0
        self._heap: list[tuple[int, int, EventHandle]] = []
        self._seq = 0
        self.dispatched = 0

    def schedule(self, at: int, fn: Callable[[], None]) -> EventHandle:
        """Schedule fn to run at virtual time `at` (>= now)."""
        if at < self.now:
            raise SimError(f"schedule at t={at} is in the past (now={self.now})")
        self._seq += 1
        handle = EventHandle(at, self._seq, fn)
        heapq.heappush(self._heap, (at, self._seq, handle))
        return handle

    def after(self, delay: int, fn: Callable[[], None]) -> EventHandle:
        return self.schedule(self.now + delay, fn)

    def run_until(self, t_end: int) -> int:
        """Dispatch every event with timestamp <= t_end; leave now == t_end."""
        if t_end < self.now:
            raise SimError(f"run_until t={t_end} is in the past (now={self.now})")
        dispatched = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            at, _, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self.now = at
            handle.fn()
            dispatched += 1
        self.now = t_end
        self.dispatched += dispatched
        return dispatched

    def drain(self, hard_limit: int = 50_000_000) -> int:
        """Dispatch until the queue is empty; clock follows the events."""
        dispatched = 0
        heap = self._heap
        while heap:
            at, _, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self.now = at
            handle.fn()
            dispatched += 1
            if dispatched > hard_limit:
                raise SimError("drain exceeded event limit; runaway event source?")
        self.dispatched += dispatched
        return dispatched

    def pending(self) -> int:
        return sum(1 for _, _, h in self._heap if not h.cancelled)


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.blake2b(
        seed.to_bytes(8, "little") + label.encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """A labeled random stream.

    Forking is keyed on the stream's own seed plus the child label, so child
    sequences are independent of when (or how often) other forks happen.
    """

    __slots__ = ("stream_id", "seed", "_rng")

    def __init__(self, seed: int, stream_id: str = "root"):
        self.stream_id = stream_id
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self._rng = random.Random(self.seed)

    def fork(self, label: str) -> "RngStream":
        child_seed = _derive_seed(self.seed, label)
        return RngStream(child_seed, f"{self.stream_id}/{label}")

    def random(self) -> float:
        return self._rng.random()

    def randrange(self, n: int) -> int:
        return self._rng.randrange(n)

    def expovariate(self, mean: float) -> float:
        return self._rng.expovariate(1.0 / mean)

    def choice_index(self, cumulative: list[float]) -> int:
        """Index into a cumulative-probability table (last entry ~1.0)."""
        x = self._rng.random()
        lo, hi = 0, len(cumulative) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cumulative[mid] < x:
                lo = mid + 1
            else:
                hi = mid
        return lo


def fork_rng(parent: RngStream, label: str) -> RngStream:
    return parent.fork(label)
