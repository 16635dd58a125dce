"""Cooperative scheduler over generator processes (Kahn network execution).

Processes run until they block on a channel or finish.  Results are
schedule-independent because every channel read and write is blocking; the
scheduler only decides *when* each process advances.  Round-robin order is
the default; a seeded random mode exercises schedule independence in tests.
A step budget guards against runaway programs, and a global deadlock (every
live process parked on a channel) is detected and reported.
"""

from __future__ import annotations

import random
from collections import deque
from typing import Dict, List, Optional

from ..errors import DeadlockDetected, NonTermination


class Process:
    __slots__ = ("name", "gen", "done", "stalls")

    def __init__(self, name: str, gen):
        self.name = name
        self.gen = gen
        self.done = False
        self.stalls = 0


class Scheduler:
    def __init__(self, mode: str = "rr", seed: Optional[int] = None,
                 max_steps: int = 500_000_000):
        self.mode = mode
        self.rng = random.Random(seed)
        self.max_steps = max_steps
        self.runnable = deque()
        self.live: Dict[str, Process] = {}
        self.steps = 0

    def wake(self, waiters: List[Process]) -> None:
        for proc in waiters:
            self.runnable.append(proc)
        waiters.clear()

    def run(self, procs: List[Process]) -> Dict[str, int]:
        """Drive all processes to completion; returns per-process stalls."""
        self.runnable.clear()
        self.live = {}
        for p in procs:
            self.live[p.name] = p
            self.runnable.append(p)

        while self.live:
            if not self.runnable:
                blocked = tuple(self.live)
                raise DeadlockDetected(blocked)
            if self.mode == "rr" or len(self.runnable) == 1:
                proc = self.runnable.popleft()
            else:
                i = self.rng.randrange(len(self.runnable))
                self.runnable.rotate(-i)
                proc = self.runnable.popleft()
            if proc.done:
                continue
            self.steps += 1
            if self.steps > self.max_steps:
                raise NonTermination(self.max_steps)
            try:
                desc = next(proc.gen)
            except StopIteration:
                proc.done = True
                del self.live[proc.name]
                continue
            kind, ch = desc
            proc.stalls += 1
            if kind == "r":
                ch.read_waiters.append(proc)
            else:
                ch.write_waiters.append(proc)
        return {p.name: p.stalls for p in procs}
