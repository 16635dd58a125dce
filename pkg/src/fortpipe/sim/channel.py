"""Bounded blocking FIFO channels for the cooperative process scheduler.

Blocking is realized by suspension: `push`/`pop` are generators that yield a
block descriptor while the operation cannot proceed; the scheduler parks the
process on the channel and wakes it when the other side moves.
"""

from __future__ import annotations

from collections import deque
from typing import Optional

from ..errors import WriteAfterClose


class EndOfStream:
    """Sentinel returned by pop() on an empty, closed channel."""

    _instance: Optional["EndOfStream"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EndOfStream"


EOS = EndOfStream()


class Channel:
    __slots__ = ("name", "capacity", "q", "closed", "pushes", "pops",
                 "read_waiters", "write_waiters", "_sched")

    def __init__(self, name: str, capacity: int):
        assert capacity >= 1
        self.name = name
        self.capacity = capacity
        self.q = deque()
        self.closed = False
        self.pushes = 0
        self.pops = 0
        self.read_waiters = []
        self.write_waiters = []
        self._sched = None

    def bind(self, sched) -> None:
        self._sched = sched

    # both methods are generators: `yield from ch.push(v)` / `yield from ch.pop()`

    def push(self, v):
        while len(self.q) >= self.capacity:
            if self.closed:
                raise WriteAfterClose(f"push on closed channel '{self.name}'")
            yield ("w", self)
        if self.closed:
            raise WriteAfterClose(f"push on closed channel '{self.name}'")
        self.q.append(v)
        self.pushes += 1
        if self.read_waiters:
            self._sched.wake(self.read_waiters)

    def pop(self):
        while not self.q:
            if self.closed:
                return EOS
            yield ("r", self)
        v = self.q.popleft()
        self.pops += 1
        if self.write_waiters:
            self._sched.wake(self.write_waiters)
        return v

    def close(self) -> None:
        self.closed = True
        if self._sched is not None and self.read_waiters:
            self._sched.wake(self.read_waiters)

    @property
    def residual(self) -> int:
        return len(self.q)


_MISS = object()


def try_push(ch: Channel, v) -> bool:
    """Non-blocking push attempt; the generator path is the fallback."""
    if len(ch.q) >= ch.capacity or ch.closed:
        return False
    ch.q.append(v)
    ch.pushes += 1
    if ch.read_waiters:
        ch._sched.wake(ch.read_waiters)
    return True


def try_pop(ch: Channel):
    """Non-blocking pop attempt; returns the _MISS sentinel when empty."""
    if not ch.q:
        return _MISS
    v = ch.q.popleft()
    ch.pops += 1
    if ch.write_waiters:
        ch._sched.wake(ch.write_waiters)
    return v
