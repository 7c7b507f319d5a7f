"""Ordered, run-once shutdown."""

from __future__ import annotations

import logging
import threading

log = logging.getLogger(__name__)


class ShutdownCoordinator:
    """Runs a fixed list of named cleanup steps exactly once.

    ``request()`` may be called from any thread or signal handler; calls
    after the first are ignored. A failing step is logged and the next one
    still runs.
    """

    def __init__(self, steps):
        self.steps = list(steps)
        self._lock = threading.Lock()
        self._started = False
        self.done = threading.Event()
        self.completed: list[str] = []
        self.failed: list[str] = []
        self.cause: str | None = None

    @property
    def started(self) -> bool:
        return self._started

    def request(self, cause: str = "signal") -> bool:
        """Run the cleanup. Returns False if shutdown was already under way."""
        with self._lock:
            if self._started:
                log.info("shutdown already in progress; ignoring %s", cause)
                return False
            self._started = True
            self.cause = cause
        for name, step in self.steps:
            try:
                step()
            except Exception:
                log.exception("shutdown step %s failed", name)
                self.failed.append(name)
            else:
                self.completed.append(name)
        self.done.set()
        return True
