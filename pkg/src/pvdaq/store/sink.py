"""Time-series sink clients and the outage backlog.

A sink's ``write(lines)`` either delivers the whole batch or raises
``ConnectionError``/``OSError``. Acquisition never sees those: batches
wait in :class:`SinkBacklog` and :func:`push_frames` retries them in order.
"""

from __future__ import annotations

import logging
import urllib.error
import urllib.parse
import urllib.request
from collections import deque
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

DEFAULT_BACKLOG_LIMIT = 24 * 60   # one day of minute frames


class Sink:
    def write(self, lines: list[str]) -> None:
        raise NotImplementedError

    def flush(self) -> None:
        pass

    def close(self) -> None:
        pass


class NullSink(Sink):
    def write(self, lines):
        pass


class FileSink(Sink):
    """Appends delivered lines to a text file; the file doubles as the sink export.

    ``available`` lets a simulation take the "network" down.
    """

    def __init__(self, path: str | Path, available=None):
        self.path = Path(path)
        self.available = available or (lambda: True)

    def write(self, lines):
        if not self.available():
            raise ConnectionError("sink unreachable")
        with open(self.path, "a", encoding="ascii") as fh:
            fh.write("".join(line + "\n" for line in lines))


class HttpSink(Sink):
    """InfluxDB-v2 style ``/api/v2/write`` endpoint."""

    def __init__(self, url: str, org: str = "", bucket: str = "", token: str = "",
                 timeout: float = 10.0):
        query = urllib.parse.urlencode({"org": org, "bucket": bucket, "precision": "s"})
        self.endpoint = f"{url.rstrip('/')}/api/v2/write?{query}"
        self.token = token
        self.timeout = timeout

    def write(self, lines):
        req = urllib.request.Request(self.endpoint, data="\n".join(lines).encode(), method="POST")
        req.add_header("Content-Type", "text/plain; charset=utf-8")
        if self.token:
            req.add_header("Authorization", f"Token {self.token}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                if resp.status >= 300:
                    raise ConnectionError(f"sink answered HTTP {resp.status}")
        except urllib.error.HTTPError as exc:
            raise ConnectionError(f"sink answered HTTP {exc.code}") from exc
        except urllib.error.URLError as exc:
            raise ConnectionError(str(exc.reason)) from exc


@dataclass(frozen=True)
class Batch:
    key: str
    lines: tuple[str, ...]


class SinkBacklog:
    """Bounded FIFO of undelivered batches; overflow drops the oldest."""

    def __init__(self, limit: int = DEFAULT_BACKLOG_LIMIT):
        if limit < 1:
            raise ValueError("backlog limit must be positive")
        self.limit = limit
        self.pending: deque[Batch] = deque()
        self.high_water = 0
        self.dropped = 0

    def __len__(self):
        return len(self.pending)

    def enqueue(self, key: str, lines) -> None:
        lines = tuple(lines)
        if not lines:
            return
        if len(self.pending) >= self.limit:
            old = self.pending.popleft()
            self.dropped += 1
            log.warning("sink backlog full (%d); dropped batch %s", self.limit, old.key)
        self.pending.append(Batch(key, lines))
        self.high_water = max(self.high_water, len(self.pending))


@dataclass(frozen=True)
class PushReport:
    delivered: int
    remaining: int
    error: str | None = None


def push_frames(sink: Sink, backlog: SinkBacklog) -> PushReport:
    """Deliver pending batches oldest first; stop quietly at the first failure."""
    delivered = 0
    while backlog.pending:
        batch = backlog.pending[0]
        try:
            sink.write(list(batch.lines))
        except (ConnectionError, OSError) as exc:
            return PushReport(delivered, len(backlog.pending), str(exc) or type(exc).__name__)
        backlog.pending.popleft()
        delivered += 1
    return PushReport(delivered, 0)
