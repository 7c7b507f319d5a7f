"""Injectable clocks.

All timing in the daemon goes through a :class:`Clock`. Times are plain
floats counting seconds of *local civil time* since 1970-01-01 00:00 (no
zone), which keeps minute alignment and day arithmetic trivial. Use
:func:`to_seconds` / :func:`from_seconds` at the edges.
"""

from __future__ import annotations

import threading
import time as _time
from abc import ABC, abstractmethod
from datetime import date, datetime, timedelta
from zoneinfo import ZoneInfo

_EPOCH = datetime(1970, 1, 1)
DAY = 86400


def to_seconds(dt: datetime) -> float:
    """Naive local datetime -> local epoch seconds."""
    return (dt - _EPOCH) / timedelta(seconds=1)


def from_seconds(t: float) -> datetime:
    return _EPOCH + timedelta(seconds=t)


def day_start(t: float) -> float:
    return float(int(t // DAY) * DAY)


def date_of(t: float) -> date:
    return from_seconds(day_start(t)).date()


def time_of_day(t: float) -> float:
    return t - day_start(t)


class Clock(ABC):
    @abstractmethod
    def time(self) -> float:
        ...

    def now(self) -> datetime:
        return from_seconds(self.time())

    @abstractmethod
    def sleep(self, seconds: float) -> None:
        ...

    @abstractmethod
    def sleep_until(self, t: float, stop: threading.Event | None = None) -> bool:
        """Block until local time ``t``. Returns False if ``stop`` was set."""


class SystemClock(Clock):
    """Wall clock in the site timezone."""

    def __init__(self, timezone: str = "UTC"):
        self.tz = ZoneInfo(timezone)

    def time(self) -> float:
        return to_seconds(datetime.now(self.tz).replace(tzinfo=None))

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            _time.sleep(seconds)

    def sleep_until(self, t, stop=None):
        stop = stop or threading.Event()
        while not stop.is_set():
            remaining = t - self.time()
            if remaining <= 0:
                return True
            stop.wait(min(remaining, 1.0))
        return False


class ScaledClock(Clock):
    """Real-time clock running ``speedup`` times faster than the wall, from ``start``."""

    def __init__(self, start: float, speedup: float = 1.0):
        if speedup <= 0:
            raise ValueError("speedup must be positive")
        self.start = start
        self.speedup = speedup
        self._m0 = _time.monotonic()

    def time(self) -> float:
        return self.start + (_time.monotonic() - self._m0) * self.speedup

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            _time.sleep(seconds / self.speedup)

    def sleep_until(self, t, stop=None):
        stop = stop or threading.Event()
        while not stop.is_set():
            remaining = t - self.time()
            if remaining <= 0:
                return True
            stop.wait(min(remaining / self.speedup, 0.5))
        return False


class SimClock(Clock):
    """Discrete simulated clock; sleeping advances time instantly.

    Kept in integer microseconds so repeated 5 ms / 16 ms waits never drift.
    """

    def __init__(self, start: float | datetime = 0.0):
        if isinstance(start, datetime):
            start = to_seconds(start)
        self._us = round(start * 1_000_000)
        self._lock = threading.Lock()

    def time(self) -> float:
        return self._us / 1_000_000

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot move simulated time backwards")
        with self._lock:
            self._us += round(seconds * 1_000_000)

    def advance_to(self, t: float) -> None:
        target = round(t * 1_000_000)
        with self._lock:
            if target > self._us:
                self._us = target

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self.advance(seconds)

    def sleep_until(self, t, stop=None):
        if stop is not None and stop.is_set():
            return False
        self.advance_to(t)
        return stop is None or not stop.is_set()
