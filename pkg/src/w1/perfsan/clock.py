"""Tick sources for the event logger.

A clock returns unsigned tick counts and declares how many ticks make one
second; the rate is written into the log header.
"""

import threading
import time
from typing import Protocol, runtime_checkable

NANOSECONDS_PER_SECOND = 1_000_000_000


@runtime_checkable
class Clock(Protocol):
    """Monotonic tick source."""

    tick_rate: int

    def now(self) -> int: ...


class MonotonicClock:
    """Nanosecond-resolution monotonic time."""

    tick_rate = NANOSECONDS_PER_SECOND

    def now(self) -> int:
        return time.monotonic_ns()


class ManualClock:
    """Clock that only moves when told to. Used by tests."""

    def __init__(self, start: int = 0, tick_rate: int = NANOSECONDS_PER_SECOND) -> None:
        self.tick_rate = tick_rate
        self._ticks = start

    def now(self) -> int:
        return self._ticks

    def advance(self, ticks: int) -> None:
        if ticks < 0:
            raise ValueError("clock cannot go backwards")
        self._ticks += ticks

    def set(self, ticks: int) -> None:
        if ticks < self._ticks:
            raise ValueError("clock cannot go backwards")
        self._ticks = ticks


class SteppingClock(ManualClock):
    """Clock that advances ``step`` ticks on every read.

    Gives reproducible, strictly increasing timestamps for synthetic runs.
    """

    def __init__(
        self,
        step: int = 10,
        start: int = 0,
        tick_rate: int = NANOSECONDS_PER_SECOND,
    ) -> None:
        super().__init__(start=start, tick_rate=tick_rate)
        if step <= 0:
            raise ValueError("step must be > 0")
        self.step = step
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            self._ticks += self.step
            return self._ticks
