"""Bounded single-producer/single-consumer hand-off with drop-oldest policy.

A virtual monitor must show the newest image; a stale frame is worse than a
dropped one. When the queue is full the oldest entry is evicted, so queue
length never exceeds the configured depth and consumers always see items in
the order they were offered (with gaps, never reordering).
"""

from __future__ import annotations

import threading
from collections import deque


class QueueClosed(Exception):
    """The queue was closed; no further items will arrive."""


class DropOldestQueue:
    def __init__(self, depth: int = 4):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.depth = depth
        self._items = deque()
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)
        self._closed = False
        self.offered = 0
        self.dropped = 0
        self.delivered = 0

    def put(self, item) -> bool:
        """Offer an item; returns False if the oldest entry was evicted for it."""
        with self._ready:
            if self._closed:
                raise QueueClosed
            self.offered += 1
            evicted = False
            if len(self._items) >= self.depth:
                self._items.popleft()
                self.dropped += 1
                evicted = True
            self._items.append(item)
            self._ready.notify()
            return not evicted

    def get(self, timeout: float | None = None):
        """Pop the oldest item, blocking until one arrives or the queue closes."""
        with self._ready:
            while not self._items:
                if self._closed:
                    raise QueueClosed
                if not self._ready.wait(timeout):
                    raise TimeoutError("queue get timed out")
            item = self._items.popleft()
            self.delivered += 1
            return item

    def close(self, drain_to_dropped: bool = True) -> None:
        """Close the queue; by default undelivered residue is counted as dropped."""
        with self._ready:
            if self._closed:
                return
            self._closed = True
            if drain_to_dropped:
                self.dropped += len(self._items)
                self._items.clear()
            self._ready.notify_all()

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)

    @property
    def closed(self) -> bool:
        return self._closed
